//! Diachronic term tracking over dated corpus snapshots.
//!
//! The pipeline runs in stages, each backed by one module:
//!
//! - [`corpus`]: ingest document dumps into immutable, dated snapshots behind a checksummed manifest
//! - [`text`]: tokenization, seeded phrase detection, vocabularies
//! - [`freq`]: per-snapshot TF-IDF tables
//! - [`embed`]: CBOW negative-sampling embeddings, an atemporal compass and per-snapshot slices
//! - [`diachrony`]: eligibility, timeseries assembly, correlation, neighbors, similarity matrices
//! - [`cli`]: the `driftscope` command-line front end

pub mod cli;
pub mod corpus;
pub mod diachrony;
pub mod embed;
pub mod error;
pub mod freq;
pub mod text;

pub use error::{Error, Result};
