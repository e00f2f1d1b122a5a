use rand::Rng;

/// Draws ids with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

pub const UNIGRAM_POWER: f64 = 0.75;

impl NegativeSampler {
    pub fn new(counts: impl IntoIterator<Item = u64>) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .into_iter()
            .map(|c| {
                acc += (c as f64).powf(UNIGRAM_POWER);
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn probability(&self, id: usize) -> f64 {
        let lo = if id == 0 {
            0.0
        } else {
            self.cumulative[id - 1]
        };
        (self.cumulative[id] - lo) / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }
}
