//! Candidate tracking across snapshots: detection, eligibility, frequency and
//! semantic-shift timeseries, correlation classes, neighbors and timeseries
//! similarity matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::embed::{cosine_similarity, cosine_similarity_f64, CompassModel, Matrix, SliceModel};
use crate::error::{Error, Result};
use crate::freq::TfidfTable;
use crate::text::Vocabulary;

pub const MIN_RUN: usize = 4;
pub const CLASSIFICATION_THRESHOLD: f64 = 0.53;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub snapshot_id: String,
    pub detected: BTreeSet<String>,
    pub candidates: usize,
    pub coverage: f64,
}

/// A candidate is detected when its normalized form occurs at least once.
pub fn detect_candidates(candidates: &[String], table: &TfidfTable) -> Result<Detection> {
    let distinct: BTreeSet<&String> = candidates.iter().collect();
    if distinct.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let detected: BTreeSet<String> = distinct
        .iter()
        .filter(|c| table.counts(c).0 > 0)
        .map(|c| c.to_string())
        .collect();
    Ok(Detection {
        snapshot_id: table.snapshot_id().to_string(),
        coverage: detected.len() as f64 / distinct.len() as f64,
        candidates: distinct.len(),
        detected,
    })
}

/// Tie-break among equally long runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunSelection {
    #[default]
    Earliest,
    Latest,
}

/// Longest run of `true`; ties resolved by `selection`.
pub fn longest_run(mask: &[bool], selection: RunSelection) -> Option<Range<usize>> {
    let mut best: Option<Range<usize>> = None;
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        let len = i - start;
        let better = match &best {
            None => true,
            Some(b) => match selection {
                RunSelection::Earliest => len > b.len(),
                RunSelection::Latest => len >= b.len(),
            },
        };
        if better {
            best = Some(start..i);
        }
    }
    best
}

pub fn is_eligible(mask: &[bool], min_run: usize) -> bool {
    longest_run(mask, RunSelection::Earliest).is_some_and(|r| r.len() >= min_run)
}

/// Terms present in at least `min_run` consecutive snapshots.
pub fn eligible_candidates(
    presence: &BTreeMap<String, Vec<bool>>,
    min_run: usize,
) -> BTreeSet<String> {
    presence
        .iter()
        .filter(|(_, mask)| is_eligible(mask, min_run))
        .map(|(t, _)| t.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesParams {
    pub min_count: u64,
    pub min_run: usize,
    pub selection: RunSelection,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            min_count: 3,
            min_run: MIN_RUN,
            selection: RunSelection::Earliest,
        }
    }
}

/// A term counts as present in a snapshot when it reaches `min_count` there
/// and has vectors in both the slice and the compass.
pub fn presence_mask(
    term: &str,
    tables: &[TfidfTable],
    slices: &[SliceModel],
    compass: &CompassModel,
    min_count: u64,
) -> Vec<bool> {
    let in_compass = compass.vector_of(term).is_some();
    tables
        .iter()
        .zip(slices)
        .map(|(t, s)| in_compass && t.counts(term).0 >= min_count && s.contains(term))
        .collect()
}

/// Aligned per-snapshot series for one term over its selected run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermTimeseries {
    pub term: String,
    /// Index of the first snapshot of the run in the global snapshot order.
    pub start: usize,
    pub snapshot_ids: Vec<String>,
    pub raw_counts: Vec<u64>,
    pub tfidf: Vec<f64>,
    /// `tfidf[i + 1] - tfidf[i]`
    pub tfidf_delta: Vec<f64>,
    /// `1 - cos(slice vector, compass vector)`
    pub cosine_distance: Vec<f64>,
}

impl TermTimeseries {
    pub fn len(&self) -> usize {
        self.snapshot_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot_ids.is_empty()
    }

    pub fn series(&self, metric: SeriesMetric) -> &[f64] {
        match metric {
            SeriesMetric::Tfidf => &self.tfidf,
            SeriesMetric::Cosine => &self.cosine_distance,
        }
    }
}

pub fn deltas(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

fn check_alignment(tables: &[TfidfTable], slices: &[SliceModel]) -> Result<()> {
    if tables.len() != slices.len() {
        return Err(Error::LengthMismatch {
            left: tables.len(),
            right: slices.len(),
        });
    }
    for (t, s) in tables.iter().zip(slices) {
        if t.snapshot_id() != s.snapshot_id {
            return Err(Error::Integrity(format!(
                "table {} is aligned with slice {}",
                t.snapshot_id(),
                s.snapshot_id
            )));
        }
    }
    Ok(())
}

/// `tables` and `slices` are in snapshot order and aligned one to one.
pub fn assemble_timeseries(
    term: &str,
    tables: &[TfidfTable],
    slices: &[SliceModel],
    compass: &CompassModel,
    params: SeriesParams,
) -> Result<TermTimeseries> {
    check_alignment(tables, slices)?;
    let mask = presence_mask(term, tables, slices, compass, params.min_count);
    let run = longest_run(&mask, params.selection).unwrap_or(0..0);
    if run.len() < params.min_run {
        return Err(Error::Ineligible {
            term: term.to_string(),
            min_run: params.min_run,
            longest: run.len(),
        });
    }
    let anchor = compass
        .vector_of(term)
        .expect("presence implies compass vector");
    let mut ts = TermTimeseries {
        term: term.to_string(),
        start: run.start,
        snapshot_ids: Vec::with_capacity(run.len()),
        raw_counts: Vec::with_capacity(run.len()),
        tfidf: Vec::with_capacity(run.len()),
        tfidf_delta: Vec::new(),
        cosine_distance: Vec::with_capacity(run.len()),
    };
    for i in run {
        let entry = tables[i].get(term).expect("presence implies table entry");
        let v = slices[i]
            .vector_of(term)
            .expect("presence implies slice vector");
        let z = (1.0 - cosine_similarity(v, anchor)?).clamp(0.0, 2.0);
        ts.snapshot_ids.push(tables[i].snapshot_id().to_string());
        ts.raw_counts.push(entry.raw_count);
        ts.tfidf.push(entry.tfidf);
        ts.cosine_distance.push(z);
    }
    ts.tfidf_delta = deltas(&ts.tfidf);
    Ok(ts)
}

/// Pearson product-moment correlation, two-pass, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateClass {
    Positive,
    Negative,
    Uncorrelated,
}

impl CandidateClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateClass::Positive => "positive",
            CandidateClass::Negative => "negative",
            CandidateClass::Uncorrelated => "uncorrelated",
        }
    }
}

impl fmt::Display for CandidateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strict bands: `r > t` positive, `r < -t` negative, otherwise uncorrelated.
pub fn classify_candidate(r: f64, threshold: f64) -> CandidateClass {
    if r > threshold {
        CandidateClass::Positive
    } else if r < -threshold {
        CandidateClass::Negative
    } else {
        CandidateClass::Uncorrelated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub term: String,
    pub n: usize,
    pub r: f64,
    pub class: CandidateClass,
}

/// Correlates TF-IDF levels with cosine distances.
pub fn correlate(ts: &TermTimeseries, threshold: f64) -> Result<CorrelationReport> {
    let r = pearson(&ts.tfidf, &ts.cosine_distance)?;
    Ok(CorrelationReport {
        term: ts.term.clone(),
        n: ts.len(),
        r,
        class: classify_candidate(r, threshold),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub term: String,
    pub similarity: f64,
}

/// Top-k rows of `matrix` by cosine to row `query`, excluding the query and
/// zero rows; ties go to the lower id.
pub fn nearest_in(vocab: &Vocabulary, matrix: &Matrix, query: usize, k: usize) -> Vec<Neighbor> {
    if k == 0 {
        return Vec::new();
    }
    let q = matrix.row(query);
    let mut scored: Vec<(usize, f64)> = (0..vocab.len())
        .filter(|&i| i != query)
        .filter_map(|i| cosine_similarity(q, matrix.row(i)).ok().map(|s| (i, s)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
        .into_iter()
        .map(|(i, similarity)| Neighbor {
            term: vocab.term(i).to_string(),
            similarity,
        })
        .collect()
}

pub fn nearest_neighbors(term: &str, slice: &SliceModel, k: usize) -> Option<Vec<Neighbor>> {
    let id = slice.vocabulary().id(term)?;
    Some(nearest_in(slice.vocabulary(), slice.slice_matrix(), id, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceNeighbors {
    pub snapshot_id: String,
    pub neighbors: Vec<Neighbor>,
}

/// Link between the same neighbor in consecutive slices. The weight is the
/// mean of its two similarities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowLink {
    pub from_slice: usize,
    pub to_slice: usize,
    pub neighbor: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborFlow {
    pub term: String,
    pub k: usize,
    pub slices: Vec<SliceNeighbors>,
    pub links: Vec<FlowLink>,
}

impl NeighborFlow {
    /// Fraction of the k neighbors of slice `i` that persist into slice `i + 1`.
    pub fn persistence(&self, i: usize) -> f64 {
        if self.k == 0 {
            return 0.0;
        }
        let n = self.links.iter().filter(|l| l.from_slice == i).count();
        n as f64 / self.k as f64
    }

    /// Sankey-style graph: one node per (slice, neighbor), links by node index.
    pub fn to_sankey_json(&self) -> serde_json::Value {
        let mut index: HashMap<(usize, &str), usize> = HashMap::new();
        let mut nodes = Vec::new();
        for (si, s) in self.slices.iter().enumerate() {
            for n in &s.neighbors {
                index.insert((si, n.term.as_str()), nodes.len());
                nodes.push(serde_json::json!({
                    "name": n.term,
                    "snapshot_id": s.snapshot_id,
                    "similarity": n.similarity,
                }));
            }
        }
        let links: Vec<_> = self
            .links
            .iter()
            .map(|l| {
                serde_json::json!({
                    "source": index[&(l.from_slice, l.neighbor.as_str())],
                    "target": index[&(l.to_slice, l.neighbor.as_str())],
                    "value": l.weight,
                })
            })
            .collect();
        serde_json::json!({
            "term": self.term,
            "k": self.k,
            "nodes": nodes,
            "links": links,
        })
    }
}

pub fn neighbor_flows(term: &str, slices: &[SliceModel], k: usize) -> NeighborFlow {
    let lists: Vec<SliceNeighbors> = slices
        .iter()
        .map(|s| SliceNeighbors {
            snapshot_id: s.snapshot_id.clone(),
            neighbors: nearest_neighbors(term, s, k).unwrap_or_default(),
        })
        .collect();
    let mut links = Vec::new();
    for (i, pair) in lists.windows(2).enumerate() {
        let later: HashMap<&str, f64> = pair[1]
            .neighbors
            .iter()
            .map(|n| (n.term.as_str(), n.similarity))
            .collect();
        for n in &pair[0].neighbors {
            if let Some(&s) = later.get(n.term.as_str()) {
                links.push(FlowLink {
                    from_slice: i,
                    to_slice: i + 1,
                    neighbor: n.term.clone(),
                    weight: (n.similarity + s) / 2.0,
                });
            }
        }
    }
    NeighborFlow {
        term: term.to_string(),
        k,
        slices: lists,
        links,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapRow {
    pub neighbor: String,
    pub cells: Vec<Option<f64>>,
}

/// Rows are the union of per-slice top-k neighbors, sorted by term; cells
/// hold the similarity in each slice, `None` where either term is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub term: String,
    pub snapshot_ids: Vec<String>,
    pub rows: Vec<HeatmapRow>,
}

impl Heatmap {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["neighbor".to_string()];
        header.extend(self.snapshot_ids.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.neighbor.clone()];
            rec.extend(
                row.cells
                    .iter()
                    .map(|c| c.map_or_else(|| "NA".to_string(), |v| v.to_string())),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Largest max-minus-min over the defined cells of any row.
    pub fn max_row_range(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let vals: Vec<f64> = r.cells.iter().flatten().copied().collect();
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                if vals.is_empty() {
                    0.0
                } else {
                    hi - lo
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn neighbor_heatmap(term: &str, slices: &[SliceModel], k: usize) -> Heatmap {
    let mut union = BTreeSet::new();
    for s in slices {
        for n in nearest_neighbors(term, s, k).unwrap_or_default() {
            union.insert(n.term);
        }
    }
    let rows = union
        .into_iter()
        .map(|neighbor| {
            let cells = slices
                .iter()
                .map(|s| match (s.vector_of(term), s.vector_of(&neighbor)) {
                    (Some(a), Some(b)) => cosine_similarity(a, b).ok(),
                    _ => None,
                })
                .collect();
            HeatmapRow { neighbor, cells }
        })
        .collect();
    Heatmap {
        term: term.to_string(),
        snapshot_ids: slices.iter().map(|s| s.snapshot_id.clone()).collect(),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMetric {
    Tfidf,
    Cosine,
}

impl SeriesMetric {
    pub fn tag(self) -> &'static str {
        match self {
            SeriesMetric::Tfidf => "tfidf-series",
            SeriesMetric::Cosine => "cosine-series",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestMatch {
    pub index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    pub metric: SeriesMetric,
    pub terms: Vec<String>,
    /// `values[i][j]`; `None` when the pair shares too few snapshots or a
    /// series is all zeros.
    pub values: Vec<Vec<Option<f64>>>,
    pub best: Vec<Option<BestMatch>>,
}

impl SimilarityMatrix {
    pub fn best_match(&self, term: &str) -> Option<(&str, f64)> {
        let i = self.terms.iter().position(|t| t == term)?;
        self.best[i]
            .as_ref()
            .map(|b| (self.terms[b.index].as_str(), b.similarity))
    }
}

/// Values of two series over their shared snapshots.
fn aligned(a: &[String], av: &[f64], b: &[String], bv: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pos: HashMap<&str, usize> = b.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    a.iter()
        .zip(av)
        .filter_map(|(s, &x)| pos.get(s.as_str()).map(|&j| (x, bv[j])))
        .unzip()
}

/// Cosine similarity between candidates' series over shared snapshots.
pub fn timeseries_similarity_matrix(
    series: &[TermTimeseries],
    metric: SeriesMetric,
    min_overlap: usize,
) -> Result<SimilarityMatrix> {
    let n = series.len();
    let mut values = vec![vec![None; n]; n];
    let mut any_pair = false;
    for i in 0..n {
        let si = series[i].series(metric);
        if si.len() >= min_overlap {
            values[i][i] = cosine_similarity_f64(si, si).ok().map(|_| 1.0);
        }
        for j in i + 1..n {
            let (x, y) = aligned(
                &series[i].snapshot_ids,
                si,
                &series[j].snapshot_ids,
                series[j].series(metric),
            );
            if x.len() < min_overlap {
                continue;
            }
            if let Ok(s) = cosine_similarity_f64(&x, &y) {
                values[i][j] = Some(s);
                values[j][i] = Some(s);
                any_pair = true;
            }
        }
    }
    if !any_pair {
        return Err(Error::InsufficientOverlap(min_overlap));
    }
    let best = (0..n)
        .map(|i| {
            let mut best: Option<BestMatch> = None;
            for (j, v) in values[i].iter().enumerate() {
                if let (true, Some(s)) = (i != j, *v) {
                    if best.as_ref().is_none_or(|b| s > b.similarity) {
                        best = Some(BestMatch {
                            index: j,
                            similarity: s,
                        });
                    }
                }
            }
            best
        })
        .collect();
    Ok(SimilarityMatrix {
        metric,
        terms: series.iter().map(|s| s.term.clone()).collect(),
        values,
        best,
    })
}
