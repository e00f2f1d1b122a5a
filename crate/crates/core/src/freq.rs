//! Per-snapshot TF-IDF.
//!
//! Scores use log-scaled corpus term frequency times unsmoothed inverse
//! document frequency, natural logs, each snapshot on its own:
//!
//! ```text
//! tfidf(t) = (1 + ln(count(t))) * ln(N / df(t))
//! ```
//!
//! A term absent from a snapshot has no score at all, which is distinct from
//! a present term spread over every document (score 0).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{term_counts, TokenStream, Vocabulary};

pub fn tfidf(raw_count: u64, doc_freq: u64, doc_count: u64) -> Option<f64> {
    if raw_count == 0 || doc_freq == 0 || doc_freq > doc_count {
        return None;
    }
    Some((1.0 + (raw_count as f64).ln()) * (doc_count as f64 / doc_freq as f64).ln())
}

/// (raw count, document frequency) of one term; (0, 0) when absent.
pub fn frequency_counts(term: &str, snapshot: &[TokenStream]) -> (u64, u64) {
    let mut raw = 0;
    let mut df = 0;
    for doc in snapshot {
        let n = doc.iter().filter(|t| *t == term).count() as u64;
        raw += n;
        df += u64::from(n > 0);
    }
    (raw, df)
}

pub fn tfidf_score(term: &str, snapshot: &[TokenStream]) -> Option<f64> {
    let (raw, df) = frequency_counts(term, snapshot);
    tfidf(raw, df, snapshot.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfidfEntry {
    pub raw_count: u64,
    pub doc_freq: u64,
    pub tfidf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfTable {
    snapshot_id: String,
    doc_count: u64,
    rows: BTreeMap<String, TfidfEntry>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    term: String,
    raw_count: u64,
    doc_freq: u64,
    tfidf: f64,
}

impl TfidfTable {
    /// Scores every vocabulary term present in the snapshot.
    pub fn build(snapshot_id: &str, snapshot: &[TokenStream], vocabulary: &Vocabulary) -> Self {
        let doc_count = snapshot.len() as u64;
        let rows = term_counts(snapshot)
            .into_iter()
            .filter(|(term, _)| vocabulary.id(term).is_some())
            .filter_map(|(term, (raw_count, doc_freq))| {
                tfidf(raw_count, doc_freq, doc_count).map(|tfidf| {
                    (
                        term,
                        TfidfEntry {
                            raw_count,
                            doc_freq,
                            tfidf,
                        },
                    )
                })
            })
            .collect();
        Self {
            snapshot_id: snapshot_id.to_string(),
            doc_count,
            rows,
        }
    }

    /// Scores every term present in the snapshot.
    pub fn build_all(snapshot_id: &str, snapshot: &[TokenStream]) -> Self {
        let doc_count = snapshot.len() as u64;
        let rows = term_counts(snapshot)
            .into_iter()
            .filter_map(|(term, (raw_count, doc_freq))| {
                tfidf(raw_count, doc_freq, doc_count).map(|tfidf| {
                    (
                        term,
                        TfidfEntry {
                            raw_count,
                            doc_freq,
                            tfidf,
                        },
                    )
                })
            })
            .collect();
        Self {
            snapshot_id: snapshot_id.to_string(),
            doc_count,
            rows,
        }
    }

    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn get(&self, term: &str) -> Option<&TfidfEntry> {
        self.rows.get(term)
    }

    pub fn score(&self, term: &str) -> Option<f64> {
        self.rows.get(term).map(|e| e.tfidf)
    }

    pub fn counts(&self, term: &str) -> (u64, u64) {
        self.rows
            .get(term)
            .map_or((0, 0), |e| (e.raw_count, e.doc_freq))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TfidfEntry)> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// CSV `term,raw_count,doc_freq,tfidf`, sorted by term.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (term, e) in &self.rows {
            w.serialize(CsvRow {
                term: term.clone(),
                raw_count: e.raw_count,
                doc_freq: e.doc_freq,
                tfidf: e.tfidf,
            })
            .expect("in-memory write");
        }
        if self.rows.is_empty() {
            w.write_record(["term", "raw_count", "doc_freq", "tfidf"])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv(path: &Path, snapshot_id: &str, doc_count: u64) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut rows = BTreeMap::new();
        for row in reader.deserialize::<CsvRow>() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            if row.doc_freq > doc_count || row.raw_count < row.doc_freq {
                return Err(Error::Integrity(format!(
                    "inconsistent counts for {:?} in {}",
                    row.term,
                    path.display()
                )));
            }
            rows.insert(
                row.term,
                TfidfEntry {
                    raw_count: row.raw_count,
                    doc_freq: row.doc_freq,
                    tfidf: row.tfidf,
                },
            );
        }
        Ok(Self {
            snapshot_id: snapshot_id.to_string(),
            doc_count,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::build_vocabulary;
    use proptest::prelude::*;

    fn ts(words: &[&str]) -> TokenStream {
        words.iter().copied().collect()
    }

    fn fixture() -> Vec<TokenStream> {
        vec![
            ts(&["drug", "drug", "virus"]),
            ts(&["drug", "cell"]),
            ts(&["virus", "cell", "cell"]),
            ts(&["drug", "drug", "drug", "drug", "virus"]),
            ts(&["virus", "protein"]),
        ]
    }

    #[test]
    fn counts_by_hand() {
        // drug appears in docs 0,1,3 with counts 2,1,4.
        assert_eq!(frequency_counts("drug", &fixture()), (7, 3));
        assert_eq!(frequency_counts("absent", &fixture()), (0, 0));
    }

    #[test]
    fn score_arithmetic() {
        assert_eq!(tfidf(5, 10, 10), Some(0.0));
        let s = tfidf(1, 1, 100).unwrap();
        assert!((s - 4.605170185988092).abs() < 1e-12);
        assert!(tfidf_score("absent", &fixture()).is_none());
    }

    #[test]
    fn table_matches_per_term_scores() {
        let docs = fixture();
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let table = TfidfTable::build("s", &docs, &vocab);
        assert_eq!(table.len(), vocab.len());
        for (term, e) in table.iter() {
            assert_eq!(Some(e.tfidf), tfidf_score(term, &docs));
        }
        // virus: count 4, df 4, N 5
        let expected = (1.0 + 4f64.ln()) * (5.0f64 / 4.0).ln();
        assert!((table.score("virus").unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_intersection_gives_empty_table() {
        let vocab = build_vocabulary(&[ts(&["zzz"])], 1).unwrap();
        let table = TfidfTable::build("s", &fixture(), &vocab);
        assert!(table.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let docs = fixture();
        let table = TfidfTable::build_all("s", &docs);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), table.to_csv()).unwrap();
        let back = TfidfTable::from_csv(tmp.path(), "s", 5).unwrap();
        assert_eq!(back, table);
    }

    proptest! {
        #[test]
        fn monotone_in_df(raw in 1u64..1000, n in 2u64..1000, df in 1u64..999) {
            prop_assume!(df < n && df <= raw);
            let a = tfidf(raw, df, n).unwrap();
            let b = tfidf(raw, df + 1, n).unwrap();
            prop_assert!(a > b);
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn monotone_in_raw(raw in 1u64..1000, n in 2u64..1000, df in 1u64..999) {
            prop_assume!(df < n);
            prop_assert!(tfidf(raw + 1, df, n).unwrap() > tfidf(raw, df, n).unwrap());
        }

        #[test]
        fn zero_iff_df_equals_n(raw in 1u64..100, n in 1u64..100, df in 1u64..100) {
            prop_assume!(df <= n);
            let s = tfidf(raw, df, n).unwrap();
            prop_assert_eq!(s == 0.0, df == n);
        }
    }
}
