//! CBOW negative-sampling objective for one training example.
//!
//! For a center word `k`, context words `j_1..j_M` and sampled negatives `n_i`:
//!
//! ```text
//! h    = (C[j_1] + ... + C[j_M]) / M
//! loss = -ln σ(U[k]·h) - Σ_i ln σ(-U[n_i]·h)
//! ```
//!
//! `U` holds target rows and `C` context rows, both row-major with `dim` columns.

use num_traits::Float;

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// ln σ(x), stable for large |x|.
pub fn log_sigmoid<F: Float>(x: F) -> F {
    let softplus_neg = (-x).max(F::zero()) + (-x.abs()).exp().ln_1p();
    -softplus_neg
}

#[derive(Debug, Clone, Copy)]
pub struct CbowExample<'a> {
    pub center: u32,
    pub context: &'a [u32],
    pub negatives: &'a [u32],
}

impl CbowExample<'_> {
    /// Output rows in slot order: the center, then each negative.
    pub fn output_ids(&self) -> impl Iterator<Item = u32> + '_ {
        std::iter::once(self.center).chain(self.negatives.iter().copied())
    }
}

/// Gradients of the example loss.
///
/// `target[s*dim..(s+1)*dim]` is the gradient for output slot `s` (slot 0 is
/// the center, slot `i+1` negative `i`). Each context occurrence receives
/// `hidden / M`. Repeated ids accumulate across slots.
#[derive(Debug, Clone, Default)]
pub struct CbowGradients<F> {
    pub dim: usize,
    pub hidden: Vec<F>,
    pub target: Vec<F>,
    /// Mean context vector at the evaluation point.
    pub mean_context: Vec<F>,
}

impl<F: Float> CbowGradients<F> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            hidden: vec![F::zero(); dim],
            target: Vec::new(),
            mean_context: vec![F::zero(); dim],
        }
    }

    pub fn target_slot(&self, slot: usize) -> &[F] {
        &self.target[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Gradient with respect to each context row occurrence.
    pub fn context_scale(&self, context_len: usize) -> F {
        F::one() / F::from(context_len).expect("context length fits in float")
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Loss and analytic gradients at the current parameters. Panics on an empty context.
pub fn cbow_loss_and_gradients<F: Float>(
    target: &[F],
    context: &[F],
    dim: usize,
    example: CbowExample<'_>,
    grads: &mut CbowGradients<F>,
) -> F {
    assert!(!example.context.is_empty(), "CBOW example needs context");
    let row = |m: &'_ [F], id: u32| -> std::ops::Range<usize> {
        let start = id as usize * dim;
        debug_assert!(start + dim <= m.len());
        start..start + dim
    };

    grads.dim = dim;
    grads.mean_context.clear();
    grads.mean_context.resize(dim, F::zero());
    for &j in example.context {
        for (h, &c) in grads.mean_context.iter_mut().zip(&context[row(context, j)]) {
            *h = *h + c;
        }
    }
    let scale = grads.context_scale(example.context.len());
    for h in grads.mean_context.iter_mut() {
        *h = *h * scale;
    }

    let slots = 1 + example.negatives.len();
    grads.hidden.clear();
    grads.hidden.resize(dim, F::zero());
    grads.target.clear();
    grads.target.resize(slots * dim, F::zero());

    let mut loss = F::zero();
    for (slot, id) in example.output_ids().enumerate() {
        let u = &target[row(target, id)];
        let score = dot(u, &grads.mean_context);
        // d loss / d score: σ(s) - 1 for the positive, σ(s) for negatives.
        let coeff = if slot == 0 {
            loss = loss - log_sigmoid(score);
            sigmoid(score) - F::one()
        } else {
            loss = loss - log_sigmoid(-score);
            sigmoid(score)
        };
        for (g, &ui) in grads.hidden.iter_mut().zip(u) {
            *g = *g + coeff * ui;
        }
        for (g, &h) in grads.target[slot * dim..(slot + 1) * dim]
            .iter_mut()
            .zip(&grads.mean_context)
        {
            *g = coeff * h;
        }
    }
    loss
}
