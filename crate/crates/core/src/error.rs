use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate snapshot date {0}")]
    DuplicateSnapshotDate(chrono::NaiveDate),

    #[error("no valid documents in {path} ({skipped} records skipped)")]
    NoValidDocuments { path: PathBuf, skipped: usize },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown snapshot {0}")]
    UnknownSnapshot(String),

    #[error("vocabulary is empty after applying min_count={0}")]
    EmptyVocabulary(u64),

    #[error("model format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("undefined input: {0}")]
    Undefined(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("term {term:?} is not eligible: needs {min_run} adjacent snapshots, longest run is {longest}")]
    Ineligible {
        term: String,
        min_run: usize,
        longest: usize,
    },

    #[error("no candidate pair shares at least {0} snapshots")]
    InsufficientOverlap(usize),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
