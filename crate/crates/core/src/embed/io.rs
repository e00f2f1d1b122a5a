//! Model files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "DSEM"
//! version    u32
//! dimension  u32
//! vocab size u64
//! vocab      per term: u32 byte length, UTF-8 bytes, u64 count
//! U          vocab size × dimension f32, row-major
//! C          vocab size × dimension f32, row-major
//! ```
//!
//! The text export is the usual `"{rows} {dim}"` header followed by one
//! `term v1 ... vd` line per term.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EmbeddingModel, Matrix, MatrixKind};
use crate::corpus::write_atomic;
use crate::error::{Error, Result};
use crate::text::{VocabEntry, Vocabulary};

pub const MAGIC: &[u8; 4] = b"DSEM";
pub const VERSION: u32 = 1;

pub fn encode_model(model: &EmbeddingModel) -> Vec<u8> {
    let vocab = &model.vocabulary;
    let dim = model.dim();
    let mut out = Vec::with_capacity(20 + vocab.len() * (16 + 8 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(vocab.len() as u64).to_le_bytes());
    for e in vocab.entries() {
        out.extend_from_slice(&(e.term.len() as u32).to_le_bytes());
        out.extend_from_slice(e.term.as_bytes());
        out.extend_from_slice(&e.count.to_le_bytes());
    }
    out.extend_from_slice(&model.target.to_le_bytes());
    out.extend_from_slice(&model.context.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated model at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn matrix(&mut self, rows: usize, dim: usize) -> Result<Matrix> {
        let n = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        let raw = self.take(n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Matrix::from_vec(rows, dim, data)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<EmbeddingModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let rows = usize::try_from(r.u64()?).map_err(|_| Error::Format("vocab too large".into()))?;
    if dim == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    // Each term needs at least 12 bytes, so a bogus size is caught before allocating.
    if rows.saturating_mul(12) > bytes.len() {
        return Err(Error::Format("vocabulary size exceeds file".into()));
    }
    let mut entries = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = r.u32()? as usize;
        let term = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("term is not UTF-8".into()))?
            .to_string();
        let count = r.u64()?;
        entries.push(VocabEntry {
            term,
            count,
            doc_freq: 0,
        });
    }
    let min_count = entries.iter().map(|e| e.count).min().unwrap_or(0);
    let vocabulary = Vocabulary::from_entries(entries, min_count)?;
    let target = r.matrix(rows, dim)?;
    let context = r.matrix(rows, dim)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    EmbeddingModel::new(vocabulary, target, context)
}

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Text export of the given terms (all terms when `terms` is `None`).
/// Unknown terms are an error.
pub fn text_vectors(
    model: &EmbeddingModel,
    kind: MatrixKind,
    terms: Option<&[&str]>,
) -> Result<String> {
    let matrix = model.matrix(kind);
    let ids: Vec<usize> = match terms {
        None => (0..model.vocabulary.len()).collect(),
        Some(ts) => ts
            .iter()
            .map(|t| {
                model
                    .vocabulary
                    .id(t)
                    .ok_or(Error::Undefined("term not in model vocabulary"))
            })
            .collect::<Result<_>>()?,
    };
    let mut out = String::new();
    writeln!(out, "{} {}", ids.len(), model.dim()).expect("string write");
    for id in ids {
        out.push_str(model.vocabulary.term(id));
        for v in matrix.row(id) {
            write!(out, " {v}").expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text_vectors(
    model: &EmbeddingModel,
    kind: MatrixKind,
    terms: Option<&[&str]>,
    path: &Path,
) -> Result<()> {
    write_atomic(path, text_vectors(model, kind, terms)?.as_bytes())
}

pub fn read_text_vectors(path: &Path) -> Result<Vec<(String, Vec<f32>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty vector file".into()))?;
    let mut parts = header.split(' ');
    let parse_usize = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header {header:?}")))
    };
    let rows = parse_usize(parts.next())?;
    let dim = parse_usize(parts.next())?;
    let mut out = Vec::with_capacity(rows);
    for line in lines {
        let mut fields = line.split(' ');
        let term = fields.next().unwrap_or_default().to_string();
        let values: Vec<f32> = fields
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| Error::Format(format!("bad value {f:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Format(format!(
                "{term}: expected {dim} values, found {}",
                values.len()
            )));
        }
        out.push((term, values));
    }
    if out.len() != rows {
        return Err(Error::Format(format!(
            "expected {rows} rows, found {}",
            out.len()
        )));
    }
    Ok(out)
}
