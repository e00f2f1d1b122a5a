//! Compass-anchored temporal embeddings.
//!
//! A compass model is trained with CBOW and negative sampling over every
//! snapshot concatenated. Each snapshot then gets a slice model that starts
//! from the compass and trains with one compass matrix frozen, so all slices
//! share the frozen matrix's coordinate system. By default the target matrix
//! `U` is frozen and a slice learns its own context matrix `C^t`; a term's
//! temporal vector is its row in `C^t`, compared against its compass row in
//! `C^0`. [`FrozenRole::Context`] swaps the two roles.

mod io;
mod objective;
mod sampler;
mod train;

pub use io::{
    decode_model, encode_model, load_model, read_text_vectors, save_model, text_vectors,
    write_text_vectors, MAGIC, VERSION,
};
pub use objective::{cbow_loss_and_gradients, log_sigmoid, sigmoid, CbowExample, CbowGradients};
pub use sampler::{NegativeSampler, UNIGRAM_POWER};
pub use train::{train_compass, train_slice, train_slices};

use serde::{Deserialize, Serialize};

use crate::corpus::sha256_hex;
use crate::error::{Error, Result};
use crate::text::Vocabulary;

/// Which compass matrix stays fixed while training slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrozenRole {
    #[default]
    Target,
    Context,
}

impl FrozenRole {
    /// The matrix holding a term's temporal representation.
    pub fn representative(self) -> MatrixKind {
        match self {
            FrozenRole::Target => MatrixKind::Context,
            FrozenRole::Context => MatrixKind::Target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Target,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub dimension: usize,
    /// Context words taken on each side of the center.
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    /// Frequent-word subsampling threshold; `None` keeps every token.
    pub subsample: Option<f64>,
    /// Set from the run, not from a `[training]` config section.
    #[serde(skip)]
    pub seed: u64,
    /// Worker threads for slice training; the compass always trains on one.
    #[serde(skip)]
    pub threads: usize,
    pub frozen: FrozenRole,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            dimension: 100,
            window: 5,
            min_count: 3,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            subsample: None,
            seed: 42,
            threads: 1,
            frozen: FrozenRole::Target,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dimension == 0 {
            return bad("dimension must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return bad("min_learning_rate must lie in [0, learning_rate]");
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0 && t.is_finite()) {
                return bad("subsample threshold must be > 0");
            }
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        Ok(())
    }
}

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * dim,
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// SHA-256 of the little-endian bytes.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_le_bytes())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// Vocabulary plus target (`U`) and context (`C`) matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub vocabulary: Vocabulary,
    pub target: Matrix,
    pub context: Matrix,
}

impl EmbeddingModel {
    pub fn new(vocabulary: Vocabulary, target: Matrix, context: Matrix) -> Result<Self> {
        let n = vocabulary.len();
        if target.rows() != n || context.rows() != n {
            return Err(Error::Format(format!(
                "matrix rows ({}, {}) do not match vocabulary size {n}",
                target.rows(),
                context.rows()
            )));
        }
        if target.dim() != context.dim() {
            return Err(Error::Format("matrix dimensions differ".into()));
        }
        Ok(Self {
            vocabulary,
            target,
            context,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn matrix(&self, kind: MatrixKind) -> &Matrix {
        match kind {
            MatrixKind::Target => &self.target,
            MatrixKind::Context => &self.context,
        }
    }

    pub fn row(&self, term: &str, kind: MatrixKind) -> Option<&[f32]> {
        self.vocabulary.id(term).map(|i| self.matrix(kind).row(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompassModel {
    pub model: EmbeddingModel,
    pub config: TrainingConfig,
}

impl CompassModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.model.vocabulary
    }

    pub fn target(&self) -> &Matrix {
        &self.model.target
    }

    pub fn context(&self) -> &Matrix {
        &self.model.context
    }

    /// The atemporal comparator for a term: its row in the compass matrix
    /// that slices keep training.
    pub fn vector_of(&self, term: &str) -> Option<&[f32]> {
        self.model.row(term, self.config.frozen.representative())
    }
}

/// Per-snapshot model. Its vocabulary is a subset of the compass vocabulary;
/// the frozen matrix holds copies of the compass rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceModel {
    pub snapshot_id: String,
    pub model: EmbeddingModel,
    pub frozen: FrozenRole,
}

impl SliceModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.model.vocabulary
    }

    /// The trained matrix of the slice.
    pub fn slice_matrix(&self) -> &Matrix {
        self.model.matrix(self.frozen.representative())
    }

    pub fn vector_of(&self, term: &str) -> Option<&[f32]> {
        self.model.row(term, self.frozen.representative())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.model.vocabulary.id(term).is_some()
    }
}

/// Cosine similarity accumulated in `f64`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Undefined("cosine of a zero vector"));
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Cosine over `f64` series; used for timeseries comparison.
pub fn cosine_similarity_f64(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Undefined("cosine of a zero vector"));
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}
