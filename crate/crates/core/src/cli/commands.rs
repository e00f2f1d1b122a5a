use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _};
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::ledger::{RunLedger, Staging, StoreLock};
use super::reports::{self, ANALYSIS_DIR};
use super::GlobalArgs;
use crate::corpus::{
    growth_report, parse_date, write_atomic, DocumentRecord, IngestOptions, InputFormat,
    SnapshotManifest, Store,
};
use crate::diachrony::{
    assemble_timeseries, correlate, detect_candidates, neighbor_flows, neighbor_heatmap,
    timeseries_similarity_matrix, CandidateClass, SeriesMetric, SeriesParams,
};
use crate::embed::{
    load_model, save_model, train_compass, train_slices, write_text_vectors, CompassModel,
    SliceModel,
};
use crate::error::Error;
use crate::freq::TfidfTable;
use crate::text::{
    detect_phrases, load_phrase_list, normalize_phrase, tokenize, PhraseDictionary, TokenStream,
};

pub const PHRASES_FILE: &str = "phrases.csv";
pub const MODELS_DIR: &str = "models";
pub const COMPASS_FILE: &str = "compass.dsem";
pub const TFIDF_DIR: &str = "tfidf";
pub const REPORTS_DIR: &str = "reports";
pub const EXPORTS_DIR: &str = "exports";

pub fn slice_file(snapshot_id: &str) -> String {
    format!("slice-{snapshot_id}.dsem")
}

type Snapshots = Vec<(String, Vec<TokenStream>)>;

pub(crate) struct Context {
    root: PathBuf,
    config: PipelineConfig,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> anyhow::Result<Self> {
        let mut config = match &global.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        if let Some(t) = global.threads {
            config.threads = t;
        }
        if global.deterministic {
            config.threads = 1;
        }
        config.validate()?;
        let root = global
            .store
            .clone()
            .or_else(|| config.store.clone())
            .ok_or_else(|| {
                anyhow!(
                    "no store given; pass --store, set DRIFTSCOPE_STORE or set store in the config"
                )
            })?;
        config.store = Some(root.clone());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()?;
        Ok(Self { root, config, pool })
    }

    fn existing_store(&self) -> anyhow::Result<Store> {
        if !self.root.is_dir() {
            bail!(
                "store {} does not exist; ingest a snapshot first",
                self.root.display()
            );
        }
        Ok(Store::open(&self.root)?)
    }

    fn ledger(&self, command: &str) -> RunLedger {
        RunLedger::start(&self.root, command, self.config.hash())
    }

    fn manifest(&self, store: &Store) -> anyhow::Result<SnapshotManifest> {
        let manifest = store.list_snapshots()?;
        if manifest.is_empty() {
            bail!(
                "store {} has no snapshots; run ingest first",
                self.root.display()
            );
        }
        Ok(manifest)
    }

    fn record_snapshots(ledger: &mut RunLedger, manifest: &SnapshotManifest) {
        for e in &manifest.entries {
            ledger.input_checksum(format!("snapshot:{}", e.snapshot_id), e.checksum.clone());
        }
    }

    fn record_file(ledger: &mut RunLedger, path: &Path) -> anyhow::Result<()> {
        ledger.input_file(path)?;
        Ok(())
    }

    fn dictionary(&self) -> anyhow::Result<PhraseDictionary> {
        let path = self.root.join(PHRASES_FILE);
        if !path.exists() {
            bail!(
                "no phrase dictionary at {}; run phrases first",
                path.display()
            );
        }
        let p = &self.config.phrases;
        Ok(PhraseDictionary::from_csv(&path, p.delta, p.threshold)?)
    }

    fn tokenize_docs(
        &self,
        docs: &[DocumentRecord],
        dict: Option<&PhraseDictionary>,
    ) -> Vec<TokenStream> {
        let matcher = dict.map(|d| d.matcher());
        self.pool.install(|| {
            docs.par_iter()
                .map(|d| {
                    let s = tokenize(d);
                    match &matcher {
                        Some(m) => m.apply(&s),
                        None => s,
                    }
                })
                .collect()
        })
    }

    fn snapshot_streams(
        &self,
        store: &Store,
        dict: &PhraseDictionary,
    ) -> anyhow::Result<Snapshots> {
        Ok(store
            .load_all()?
            .iter()
            .map(|s| {
                (
                    s.snapshot_id().to_string(),
                    self.tokenize_docs(s.documents(), Some(dict)),
                )
            })
            .collect())
    }

    fn load_models(
        &self,
        manifest: &SnapshotManifest,
    ) -> anyhow::Result<(CompassModel, Vec<SliceModel>)> {
        let dir = self.root.join(MODELS_DIR);
        let compass_path = dir.join(COMPASS_FILE);
        if !compass_path.exists() {
            bail!(
                "no compass model at {}; run train first",
                compass_path.display()
            );
        }
        let training = self.config.training();
        let compass = CompassModel {
            model: load_model(&compass_path)?,
            config: training.clone(),
        };
        let slices = manifest
            .entries
            .iter()
            .map(|e| {
                let path = dir.join(slice_file(&e.snapshot_id));
                if !path.exists() {
                    bail!(
                        "no slice model for snapshot {}; run train first",
                        e.snapshot_id
                    );
                }
                Ok(SliceModel {
                    snapshot_id: e.snapshot_id.clone(),
                    model: load_model(&path)?,
                    frozen: training.frozen,
                })
            })
            .collect::<anyhow::Result<_>>()?;
        Ok((compass, slices))
    }

    fn load_tables(&self, manifest: &SnapshotManifest) -> anyhow::Result<Vec<TfidfTable>> {
        let dir = self.root.join(TFIDF_DIR);
        manifest
            .entries
            .iter()
            .map(|e| {
                let path = dir.join(format!("{}.csv", e.snapshot_id));
                if !path.exists() {
                    bail!(
                        "no TF-IDF table for snapshot {}; run tfidf first",
                        e.snapshot_id
                    );
                }
                Ok(TfidfTable::from_csv(&path, &e.snapshot_id, e.doc_count)?)
            })
            .collect()
    }

    pub fn ingest(
        &self,
        input: &Path,
        date: &str,
        format: InputFormat,
        incremental: bool,
        label: Option<String>,
    ) -> anyhow::Result<()> {
        let date = parse_date(date).with_context(|| format!("invalid --date {date:?}"))?;
        if !input.exists() {
            bail!("input {} does not exist", input.display());
        }
        let _lock = StoreLock::acquire(&self.root)?;
        let store = Store::open(&self.root)?;
        let mut ledger = self.ledger("ingest");
        if input.is_file() {
            Self::record_file(&mut ledger, input)?;
        }
        let options = IngestOptions {
            snapshot_id: label,
            incremental,
        };
        let out = store.ingest_snapshot(input, date, format, &options)?;
        let id = &out.entry.snapshot_id;
        ledger.output(&store.snapshot_path(id));
        ledger.output(&self.root.join(crate::corpus::MANIFEST_FILE));
        ledger.commit()?;
        println!(
            "ingested {id} ({date}): {} documents, {} skipped",
            out.entry.doc_count,
            out.skipped.len()
        );
        Ok(())
    }

    pub fn phrases(&self, seeds: Option<PathBuf>) -> anyhow::Result<()> {
        let seeds_path = seeds.or_else(|| self.config.phrases.seeds.clone());
        let seeds: BTreeSet<String> = match &seeds_path {
            Some(p) => load_phrase_list(p)?.into_iter().collect(),
            None => BTreeSet::new(),
        };
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let mut ledger = self.ledger("phrases");
        Self::record_snapshots(&mut ledger, &manifest);
        if let Some(p) = &seeds_path {
            Self::record_file(&mut ledger, p)?;
        }
        // Snapshots are cumulative, so a document is counted once in its latest version.
        let mut distinct: BTreeMap<String, DocumentRecord> = BTreeMap::new();
        for snap in store.load_all()? {
            for d in snap.documents() {
                distinct.insert(d.doc_id.clone(), d.clone());
            }
        }
        let docs: Vec<DocumentRecord> = distinct.into_values().collect();
        let streams = self.tokenize_docs(&docs, None);
        let dict = detect_phrases(&streams, &seeds, self.config.phrases.params());
        let path = self.root.join(PHRASES_FILE);
        write_atomic(&path, &dict.to_csv())?;
        ledger.output(&path);
        ledger.commit()?;
        println!(
            "phrases: {} seeded, {} learned from {} documents",
            dict.seeded().len(),
            dict.learned().len(),
            docs.len()
        );
        Ok(())
    }

    pub fn train(&self, compass_only: bool, slices_only: bool) -> anyhow::Result<()> {
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let dict = self.dictionary()?;
        let training = self.config.training();
        let models = self.root.join(MODELS_DIR);
        let compass_path = models.join(COMPASS_FILE);
        if slices_only && !compass_path.exists() {
            bail!(
                "no compass model at {}; train the compass before --slices-only",
                compass_path.display()
            );
        }
        let mut ledger = self.ledger("train");
        Self::record_snapshots(&mut ledger, &manifest);
        Self::record_file(&mut ledger, &self.root.join(PHRASES_FILE))?;
        let started = Instant::now();
        let snapshots = self.snapshot_streams(&store, &dict)?;
        let staging = Staging::new(&self.root, &models)?;

        let compass = if slices_only {
            Self::record_file(&mut ledger, &compass_path)?;
            let model = load_model(&compass_path)?;
            if model.dim() != training.dimension {
                return Err(Error::Config(format!(
                    "stored compass has dimension {}, config asks for {}",
                    model.dim(),
                    training.dimension
                ))
                .into());
            }
            fs::copy(&compass_path, staging.path().join(COMPASS_FILE))
                .with_context(|| format!("copying {}", compass_path.display()))?;
            CompassModel {
                model,
                config: training.clone(),
            }
        } else {
            let all: Vec<TokenStream> = snapshots
                .iter()
                .flat_map(|(_, docs)| docs.iter().cloned())
                .collect();
            let compass = train_compass(&all, &training)?;
            save_model(&compass.model, &staging.path().join(COMPASS_FILE))?;
            compass
        };
        ledger.output(&compass_path);

        let mut n_slices = 0;
        if !compass_only {
            for slice in train_slices(&snapshots, &compass, &training)? {
                let file = slice_file(&slice.snapshot_id);
                save_model(&slice.model, &staging.path().join(&file))?;
                ledger.output(&models.join(file));
                n_slices += 1;
            }
        }
        staging.commit()?;
        ledger.commit()?;
        println!(
            "trained compass ({} terms) and {n_slices} slice models in {:.1}s",
            compass.vocabulary().len(),
            started.elapsed().as_secs_f64()
        );
        Ok(())
    }

    pub fn tfidf(&self) -> anyhow::Result<()> {
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let dict = self.dictionary()?;
        let mut ledger = self.ledger("tfidf");
        Self::record_snapshots(&mut ledger, &manifest);
        Self::record_file(&mut ledger, &self.root.join(PHRASES_FILE))?;
        let dir = self.root.join(TFIDF_DIR);
        let staging = Staging::new(&self.root, &dir)?;
        let snapshots = self.snapshot_streams(&store, &dict)?;
        for (id, docs) in &snapshots {
            let table = TfidfTable::build_all(id, docs);
            let file = format!("{id}.csv");
            write_atomic(&staging.path().join(&file), &table.to_csv())?;
            ledger.output(&dir.join(file));
        }
        staging.commit()?;
        ledger.commit()?;
        println!("tfidf: wrote {} tables", snapshots.len());
        Ok(())
    }

    pub fn analyze(&self, candidates_path: &Path, k: Option<usize>) -> anyhow::Result<()> {
        let k = k.unwrap_or(self.config.analysis.k);
        if k == 0 {
            bail!("--k must be >= 1");
        }
        let candidates = load_phrase_list(candidates_path)?;
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates.into());
        }
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let tables = self.load_tables(&manifest)?;
        let (compass, slices) = self.load_models(&manifest)?;
        let mut ledger = self.ledger("analyze");
        Self::record_snapshots(&mut ledger, &manifest);
        Self::record_file(&mut ledger, candidates_path)?;
        Self::record_file(&mut ledger, &self.root.join(MODELS_DIR).join(COMPASS_FILE))?;

        let detections = tables
            .iter()
            .map(|t| detect_candidates(&candidates, t))
            .collect::<Result<Vec<_>, _>>()?;

        let a = &self.config.analysis;
        let params = SeriesParams {
            min_count: self.config.training.min_count,
            min_run: a.min_run,
            selection: a.selection,
        };
        let mut series = Vec::new();
        for c in &candidates {
            match assemble_timeseries(c, &tables, &slices, &compass, params) {
                Ok(ts) => series.push(ts),
                Err(Error::Ineligible { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if series.is_empty() {
            bail!(
                "no eligible candidates: none of the {} candidates reaches min_count={} in {} adjacent snapshots",
                candidates.len(),
                params.min_count,
                params.min_run
            );
        }

        let correlations: Vec<_> = series
            .iter()
            .map(|ts| match correlate(ts, a.threshold) {
                Ok(r) => Ok(Some(r)),
                Err(Error::Undefined(why)) => {
                    log::warn!("{}: r is undefined ({why})", ts.term);
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect::<Result<_, _>>()?;

        let mut matrices = Vec::new();
        for metric in [SeriesMetric::Tfidf, SeriesMetric::Cosine] {
            match timeseries_similarity_matrix(&series, metric, a.min_overlap) {
                Ok(m) => matrices.push(m),
                Err(Error::InsufficientOverlap(n)) => {
                    log::warn!("{}: no candidate pair shares {n} snapshots", metric.tag())
                }
                Err(e) => return Err(e.into()),
            }
        }

        let reports_dir = self.root.join(REPORTS_DIR).join(ANALYSIS_DIR);
        let staging = Staging::new(&self.root, &reports_dir)?;
        let out = staging.path();
        let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
            (
                "candidates.csv".into(),
                reports::candidates_csv(&series, &correlations),
            ),
            (
                "correlations.csv".into(),
                reports::correlations_csv(&correlations),
            ),
            ("timeseries.csv".into(), reports::timeseries_csv(&series)),
            (
                "best_matches.csv".into(),
                reports::best_matches_csv(&matrices),
            ),
            (
                "detection.csv".into(),
                reports::detection_csv(&detections, &manifest.entries),
            ),
        ];
        for m in &matrices {
            files.push((
                format!("similarity-{}.csv", m.metric.tag()).into(),
                reports::similarity_csv(m),
            ));
        }
        for ts in &series {
            let run = &slices[ts.start..ts.start + ts.len()];
            let flow = neighbor_flows(&ts.term, run, k);
            let mut json = serde_json::to_vec_pretty(&flow.to_sankey_json())?;
            json.push(b'\n');
            files.push((Path::new("flows").join(format!("{}.json", ts.term)), json));
            files.push((
                Path::new("heatmaps").join(format!("{}.csv", ts.term)),
                neighbor_heatmap(&ts.term, run, k).to_csv(),
            ));
        }
        for (rel, bytes) in &files {
            write_atomic(&out.join(rel), bytes)?;
            ledger.output(&reports_dir.join(rel));
        }
        staging.commit()?;
        ledger.commit()?;

        let count = |c: CandidateClass| {
            correlations
                .iter()
                .flatten()
                .filter(|r| r.class == c)
                .count()
        };
        let undefined = correlations.iter().filter(|r| r.is_none()).count();
        println!(
            "analyzed {} candidates: {} eligible ({} positive, {} negative, {} uncorrelated, {} undefined)",
            candidates.len(),
            series.len(),
            count(CandidateClass::Positive),
            count(CandidateClass::Negative),
            count(CandidateClass::Uncorrelated),
            undefined
        );
        println!("reports written to {}", reports_dir.display());
        Ok(())
    }

    pub fn export_vectors(&self, term: Option<String>, out: Option<PathBuf>) -> anyhow::Result<()> {
        let term = term.map(|t| normalize_phrase(&t));
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let (_, slices) = self.load_models(&manifest)?;
        if let Some(t) = &term {
            if !slices.iter().any(|s| s.contains(t)) {
                bail!("unknown term {t:?}: not in any slice vocabulary");
            }
        }
        let out = out.unwrap_or_else(|| {
            self.root
                .join(EXPORTS_DIR)
                .join(term.as_deref().unwrap_or("all"))
        });
        let mut ledger = self.ledger("export-vectors");
        Self::record_snapshots(&mut ledger, &manifest);
        let mut written = 0;
        for s in &slices {
            let terms: Option<Vec<&str>> = match &term {
                Some(t) if !s.contains(t) => {
                    log::warn!("{t:?} is not in slice {}; skipped", s.snapshot_id);
                    continue;
                }
                Some(t) => Some(vec![t.as_str()]),
                None => None,
            };
            let path = out.join(format!("{}.txt", s.snapshot_id));
            write_text_vectors(&s.model, s.frozen.representative(), terms.as_deref(), &path)?;
            ledger.output(&path);
            written += 1;
        }
        ledger.commit()?;
        println!("exported {written} slice files to {}", out.display());
        Ok(())
    }

    pub fn report(&self) -> anyhow::Result<()> {
        let _lock = StoreLock::acquire(&self.root)?;
        let store = self.existing_store()?;
        let manifest = self.manifest(&store)?;
        let mut ledger = self.ledger("report");
        Self::record_snapshots(&mut ledger, &manifest);
        let rows = growth_report(&manifest);
        let path = self.root.join(REPORTS_DIR).join("growth.csv");
        let bytes = reports::growth_csv(&rows, &manifest.entries);
        write_atomic(&path, &bytes)?;
        ledger.output(&path);
        ledger.commit()?;
        print!("{}", String::from_utf8_lossy(&bytes));
        Ok(())
    }
}
