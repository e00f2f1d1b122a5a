//! CSV report builders. Floats use Rust's shortest round-trip formatting and
//! missing values are written as `NA`.

use crate::corpus::{GrowthRow, ManifestEntry};
use crate::diachrony::{CorrelationReport, Detection, SimilarityMatrix, TermTimeseries};

/// Analysis outputs live here, relative to the store's reports directory.
pub const ANALYSIS_DIR: &str = "analysis";

pub const CANDIDATES_HEADER: [&str; 10] = [
    "term",
    "start_snapshot",
    "end_snapshot",
    "start_frequency",
    "end_frequency",
    "final_cosine_distance",
    "final_tfidf",
    "n",
    "r",
    "class",
];

pub const TIMESERIES_HEADER: [&str; 6] = [
    "term",
    "snapshot_id",
    "raw_count",
    "tfidf",
    "tfidf_delta",
    "cosine_distance",
];

const NA: &str = "NA";

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory flush")
}

fn row<I, S>(w: &mut csv::Writer<Vec<u8>>, fields: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).expect("in-memory write");
}

/// One row per eligible candidate. `reports[i]` is `None` when r is undefined.
pub fn candidates_csv(series: &[TermTimeseries], reports: &[Option<CorrelationReport>]) -> Vec<u8> {
    let mut w = writer();
    row(&mut w, CANDIDATES_HEADER);
    for (ts, rep) in series.iter().zip(reports) {
        let last = ts.len() - 1;
        let (r, class) = match rep {
            Some(rep) => (rep.r.to_string(), rep.class.as_str()),
            None => (NA.to_string(), "undefined"),
        };
        row(
            &mut w,
            [
                ts.term.clone(),
                ts.snapshot_ids[0].clone(),
                ts.snapshot_ids[last].clone(),
                ts.raw_counts[0].to_string(),
                ts.raw_counts[last].to_string(),
                ts.cosine_distance[last].to_string(),
                ts.tfidf[last].to_string(),
                ts.len().to_string(),
                r,
                class.to_string(),
            ],
        );
    }
    finish(w)
}

pub fn correlations_csv(reports: &[Option<CorrelationReport>]) -> Vec<u8> {
    let mut w = writer();
    row(&mut w, ["term", "n", "r", "class"]);
    for rep in reports.iter().flatten() {
        row(
            &mut w,
            [
                rep.term.clone(),
                rep.n.to_string(),
                rep.r.to_string(),
                rep.class.as_str().to_string(),
            ],
        );
    }
    finish(w)
}

pub fn timeseries_csv(series: &[TermTimeseries]) -> Vec<u8> {
    let mut w = writer();
    row(&mut w, TIMESERIES_HEADER);
    for ts in series {
        for i in 0..ts.len() {
            let delta = if i == 0 {
                NA.to_string()
            } else {
                ts.tfidf_delta[i - 1].to_string()
            };
            row(
                &mut w,
                [
                    ts.term.clone(),
                    ts.snapshot_ids[i].clone(),
                    ts.raw_counts[i].to_string(),
                    ts.tfidf[i].to_string(),
                    delta,
                    ts.cosine_distance[i].to_string(),
                ],
            );
        }
    }
    finish(w)
}

pub fn best_matches_csv(matrices: &[SimilarityMatrix]) -> Vec<u8> {
    let mut w = writer();
    row(&mut w, ["metric", "term", "best_match", "similarity"]);
    for m in matrices {
        for (term, best) in m.terms.iter().zip(&m.best) {
            let (other, sim) = match best {
                Some(b) => (m.terms[b.index].clone(), b.similarity.to_string()),
                None => (NA.to_string(), NA.to_string()),
            };
            row(
                &mut w,
                [m.metric.tag().to_string(), term.clone(), other, sim],
            );
        }
    }
    finish(w)
}

pub fn similarity_csv(m: &SimilarityMatrix) -> Vec<u8> {
    let mut w = writer();
    let mut header = vec!["term".to_string()];
    header.extend(m.terms.iter().cloned());
    row(&mut w, header);
    for (term, values) in m.terms.iter().zip(&m.values) {
        let mut rec = vec![term.clone()];
        rec.extend(
            values
                .iter()
                .map(|v| v.map_or_else(|| NA.to_string(), |v| v.to_string())),
        );
        row(&mut w, rec);
    }
    finish(w)
}

pub fn detection_csv(detections: &[Detection], manifest: &[ManifestEntry]) -> Vec<u8> {
    let mut w = writer();
    row(
        &mut w,
        ["snapshot_id", "date", "candidates", "detected", "coverage"],
    );
    for (d, e) in detections.iter().zip(manifest) {
        row(
            &mut w,
            [
                d.snapshot_id.clone(),
                e.date.format("%Y-%m-%d").to_string(),
                d.candidates.to_string(),
                d.detected.len().to_string(),
                d.coverage.to_string(),
            ],
        );
    }
    finish(w)
}

pub fn growth_csv(rows: &[GrowthRow], manifest: &[ManifestEntry]) -> Vec<u8> {
    let mut w = writer();
    row(&mut w, ["snapshot_id", "date", "doc_count", "delta"]);
    for (g, e) in rows.iter().zip(manifest) {
        row(
            &mut w,
            [
                e.snapshot_id.clone(),
                g.date.format("%Y-%m-%d").to_string(),
                g.doc_count.to_string(),
                g.delta.to_string(),
            ],
        );
    }
    finish(w)
}
