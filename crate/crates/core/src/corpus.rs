//! Snapshot store.
//!
//! Directory layout:
//! ```text
//! {store}/
//! ├── manifest.csv            # snapshot_id,date,doc_count,checksum
//! └── snapshots/
//!     └── {snapshot_id}.jsonl # canonical records, sorted by id
//! ```
//!
//! Every snapshot is the full corpus as of its date. The checksum is the
//! SHA-256 of the canonical snapshot file, which lists documents sorted by id,
//! so it depends only on document content and never on input order or date.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    #[serde(rename = "id")]
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
    #[serde(rename = "date", default, skip_serializing_if = "Option::is_none")]
    pub source_date: Option<NaiveDate>,
}

/// A dated, immutable view of the corpus.
#[derive(Debug, Clone)]
pub struct CorpusSnapshot {
    snapshot_id: String,
    snapshot_date: NaiveDate,
    documents: Arc<[DocumentRecord]>,
}

impl CorpusSnapshot {
    /// Builds a snapshot, sorting documents by id. Duplicate ids are rejected.
    pub fn new(
        snapshot_id: impl Into<String>,
        snapshot_date: NaiveDate,
        mut documents: Vec<DocumentRecord>,
    ) -> Result<Self> {
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = documents.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(Error::Integrity(format!(
                "duplicate document id {:?}",
                w[0].doc_id
            )));
        }
        Ok(Self {
            snapshot_id: snapshot_id.into(),
            snapshot_date,
            documents: documents.into(),
        })
    }

    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    pub fn snapshot_date(&self) -> NaiveDate {
        self.snapshot_date
    }

    pub fn documents(&self) -> &[DocumentRecord] {
        &self.documents
    }

    pub fn doc_count(&self) -> usize {
        self.documents.len()
    }

    /// Canonical JSONL bytes: one record per line, sorted by id.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for doc in self.documents.iter() {
            serde_json::to_writer(&mut out, doc).expect("records serialize");
            out.push(b'\n');
        }
        out
    }

    pub fn checksum(&self) -> String {
        sha256_hex(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    /// Every regular file in the directory is one document; the id is the file name.
    TextDirectory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipWarning {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub snapshot_id: String,
    pub date: NaiveDate,
    pub doc_count: u64,
    pub checksum: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotManifest {
    pub entries: Vec<ManifestEntry>,
}

impl SnapshotManifest {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn find(&self, snapshot_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.snapshot_id == snapshot_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthRow {
    pub date: NaiveDate,
    pub doc_count: u64,
    pub delta: i64,
}

/// Per-snapshot growth; the first delta is the first count, so deltas sum to the last count.
pub fn growth_report(manifest: &SnapshotManifest) -> Vec<GrowthRow> {
    let mut prev = 0i64;
    manifest
        .entries
        .iter()
        .map(|e| {
            let count = e.doc_count as i64;
            let row = GrowthRow {
                date: e.date,
                doc_count: e.doc_count,
                delta: count - prev,
            };
            prev = count;
            row
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Label for the snapshot; defaults to the ISO date.
    pub snapshot_id: Option<String>,
    /// Compose the snapshot from the latest earlier snapshot plus the input.
    pub incremental: bool,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub entry: ManifestEntry,
    pub skipped: Vec<SkipWarning>,
}

/// Parses a JSONL dump. Malformed records are skipped and reported.
pub fn read_jsonl(path: &Path) -> Result<(Vec<DocumentRecord>, Vec<SkipWarning>)> {
    #[derive(Deserialize)]
    struct RawRecord {
        id: Option<String>,
        title: Option<String>,
        text: Option<String>,
        date: Option<String>,
    }

    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), lineno + 1);
        let mut skip = |reason: String| {
            skipped.push(SkipWarning {
                location: location.clone(),
                reason,
            })
        };
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                skip(format!("malformed JSON: {e}"));
                continue;
            }
        };
        let Some(id) = raw.id.filter(|s| !s.is_empty()) else {
            skip("missing id".into());
            continue;
        };
        let Some(text) = raw.text.filter(|t| !t.trim().is_empty()) else {
            skip(format!("empty body for {id:?}"));
            continue;
        };
        let source_date = match raw.date.as_deref().map(parse_date) {
            None => None,
            Some(Ok(d)) => Some(d),
            Some(Err(_)) => {
                skip(format!("bad date for {id:?}"));
                continue;
            }
        };
        if !seen.insert(id.clone()) {
            skip(format!("duplicate id {id:?}"));
            continue;
        }
        docs.push(DocumentRecord {
            doc_id: id,
            title: raw.title.unwrap_or_default(),
            body: text,
            source_date,
        });
    }
    Ok((docs, skipped))
}

pub fn read_text_directory(dir: &Path) -> Result<(Vec<DocumentRecord>, Vec<SkipWarning>)> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry
            .file_type()
            .map_err(|e| Error::io(entry.path(), e))?
            .is_file()
        {
            paths.push(entry.path());
        }
    }
    paths.sort();
    let mut docs = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let location = path.display().to_string();
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let Ok(body) = String::from_utf8(bytes) else {
            skipped.push(SkipWarning {
                location,
                reason: "not UTF-8".into(),
            });
            continue;
        };
        if body.trim().is_empty() {
            skipped.push(SkipWarning {
                location,
                reason: "empty body".into(),
            });
            continue;
        }
        let doc_id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.push(DocumentRecord {
            doc_id,
            title: String::new(),
            body,
            source_date: None,
        });
    }
    Ok((docs, skipped))
}

pub fn parse_date(s: &str) -> std::result::Result<NaiveDate, chrono::ParseError> {
    // Accept full timestamps by keeping only the calendar date.
    let day = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(day, "%Y-%m-%d")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn valid_snapshot_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Snapshot store rooted at a directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (creating if needed) a store at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let snaps = root.join(SNAPSHOT_DIR);
        fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn snapshot_path(&self, snapshot_id: &str) -> PathBuf {
        self.root
            .join(SNAPSHOT_DIR)
            .join(format!("{snapshot_id}.jsonl"))
    }

    /// Reads the manifest without verifying snapshot contents.
    pub fn manifest(&self) -> Result<SnapshotManifest> {
        let path = self.manifest_path();
        if !path.exists() {
            return Ok(SnapshotManifest::default());
        }
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(&path, e))?.clone();
        if headers != vec!["snapshot_id", "date", "doc_count", "checksum"] {
            return Err(Error::Integrity(format!(
                "manifest header mismatch in {}",
                path.display()
            )));
        }
        let mut entries = Vec::new();
        for row in reader.deserialize::<ManifestEntry>() {
            let entry = row.map_err(|e| Error::Integrity(format!("corrupt manifest: {e}")))?;
            entries.push(entry);
        }
        if entries.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(Error::Integrity(
                "manifest entries are not strictly ascending by date".into(),
            ));
        }
        Ok(SnapshotManifest { entries })
    }

    /// Returns the date-sorted manifest after checking every snapshot file
    /// against its recorded checksum and document count.
    pub fn list_snapshots(&self) -> Result<SnapshotManifest> {
        let manifest = self.manifest()?;
        for entry in &manifest.entries {
            let path = self.snapshot_path(&entry.snapshot_id);
            let bytes = fs::read(&path).map_err(|e| {
                Error::Integrity(format!("cannot read snapshot {}: {e}", entry.snapshot_id))
            })?;
            let actual = sha256_hex(&bytes);
            if actual != entry.checksum {
                return Err(Error::Integrity(format!(
                    "checksum mismatch for snapshot {}: manifest {}, file {}",
                    entry.snapshot_id, entry.checksum, actual
                )));
            }
            let lines = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
            if lines != entry.doc_count {
                return Err(Error::Integrity(format!(
                    "snapshot {} has {} records, manifest says {}",
                    entry.snapshot_id, lines, entry.doc_count
                )));
            }
        }
        Ok(manifest)
    }

    pub fn load_snapshot(&self, snapshot_id: &str) -> Result<CorpusSnapshot> {
        let manifest = self.manifest()?;
        let entry = manifest
            .find(snapshot_id)
            .ok_or_else(|| Error::UnknownSnapshot(snapshot_id.to_string()))?;
        self.load_entry(entry)
    }

    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<CorpusSnapshot> {
        let path = self.snapshot_path(&entry.snapshot_id);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != entry.checksum {
            return Err(Error::Integrity(format!(
                "checksum mismatch for snapshot {}",
                entry.snapshot_id
            )));
        }
        let mut docs = Vec::with_capacity(entry.doc_count as usize);
        for line in bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            let doc: DocumentRecord = serde_json::from_slice(line)
                .map_err(|e| Error::Integrity(format!("corrupt snapshot record: {e}")))?;
            docs.push(doc);
        }
        CorpusSnapshot::new(entry.snapshot_id.clone(), entry.date, docs)
    }

    /// Loads every snapshot in date order.
    pub fn load_all(&self) -> Result<Vec<CorpusSnapshot>> {
        let manifest = self.list_snapshots()?;
        manifest
            .entries
            .iter()
            .map(|e| self.load_entry(e))
            .collect()
    }

    /// Ingests one dump as the snapshot for `date`.
    pub fn ingest_snapshot(
        &self,
        input: &Path,
        date: NaiveDate,
        format: InputFormat,
        options: &IngestOptions,
    ) -> Result<IngestOutcome> {
        let mut manifest = self.manifest()?;
        if manifest.entries.iter().any(|e| e.date == date) {
            return Err(Error::DuplicateSnapshotDate(date));
        }
        let snapshot_id = options
            .snapshot_id
            .clone()
            .unwrap_or_else(|| date.format("%Y-%m-%d").to_string());
        if !valid_snapshot_id(&snapshot_id) {
            return Err(Error::Config(format!(
                "invalid snapshot id {snapshot_id:?}"
            )));
        }
        if manifest.find(&snapshot_id).is_some() {
            return Err(Error::Config(format!(
                "snapshot id {snapshot_id:?} already exists"
            )));
        }

        let (docs, skipped) = match format {
            InputFormat::Jsonl => read_jsonl(input)?,
            InputFormat::TextDirectory => read_text_directory(input)?,
        };
        for w in &skipped {
            log::warn!("skipped record at {}: {}", w.location, w.reason);
        }
        if docs.is_empty() {
            return Err(Error::NoValidDocuments {
                path: input.to_path_buf(),
                skipped: skipped.len(),
            });
        }

        let docs = if options.incremental {
            match manifest.entries.iter().rev().find(|e| e.date < date) {
                Some(base) => {
                    let base = self.load_entry(base)?;
                    let mut merged: BTreeMap<String, DocumentRecord> = base
                        .documents()
                        .iter()
                        .map(|d| (d.doc_id.clone(), d.clone()))
                        .collect();
                    for d in docs {
                        merged.insert(d.doc_id.clone(), d);
                    }
                    merged.into_values().collect()
                }
                None => {
                    log::info!("no earlier snapshot; incremental ingest starts from empty");
                    docs
                }
            }
        } else {
            docs
        };

        let snapshot = CorpusSnapshot::new(snapshot_id.clone(), date, docs)?;
        let bytes = snapshot.canonical_bytes();
        let entry = ManifestEntry {
            snapshot_id: snapshot_id.clone(),
            date,
            doc_count: snapshot.doc_count() as u64,
            checksum: sha256_hex(&bytes),
        };
        write_atomic(&self.snapshot_path(&snapshot_id), &bytes)?;

        manifest.entries.push(entry.clone());
        manifest.entries.sort_by_key(|e| e.date);
        self.write_manifest(&manifest)?;
        Ok(IngestOutcome { entry, skipped })
    }

    fn write_manifest(&self, manifest: &SnapshotManifest) -> Result<()> {
        let path = self.manifest_path();
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["snapshot_id", "date", "doc_count", "checksum"])
                .map_err(|e| Error::csv(&path, e))?;
            for e in &manifest.entries {
                w.write_record([
                    e.snapshot_id.as_str(),
                    &e.date.format("%Y-%m-%d").to_string(),
                    &e.doc_count.to_string(),
                    e.checksum.as_str(),
                ])
                .map_err(|e| Error::csv(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        write_atomic(&path, &buf)
    }
}

/// Writes via a sibling temp file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
