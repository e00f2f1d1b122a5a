use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diachrony::{RunSelection, CLASSIFICATION_THRESHOLD, DEFAULT_K, MIN_RUN};
use crate::embed::TrainingConfig;
use crate::error::{Error, Result};
use crate::text::PhraseParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhraseSection {
    /// Seed phrase list, one phrase per line.
    pub seeds: Option<PathBuf>,
    pub delta: f64,
    pub threshold: f64,
    pub passes: usize,
}

impl Default for PhraseSection {
    fn default() -> Self {
        let p = PhraseParams::default();
        Self {
            seeds: None,
            delta: p.delta,
            threshold: p.threshold,
            passes: p.passes,
        }
    }
}

impl PhraseSection {
    pub fn params(&self) -> PhraseParams {
        PhraseParams {
            delta: self.delta,
            threshold: self.threshold,
            passes: self.passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub k: usize,
    pub min_run: usize,
    pub threshold: f64,
    pub selection: RunSelection,
    /// Shared snapshots required before two series are compared.
    pub min_overlap: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            min_run: MIN_RUN,
            threshold: CLASSIFICATION_THRESHOLD,
            selection: RunSelection::Earliest,
            min_overlap: MIN_RUN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub phrases: PhraseSection,
    pub training: TrainingConfig,
    pub analysis: AnalysisSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let training = TrainingConfig::default();
        Self {
            store: None,
            seed: training.seed,
            threads: training.threads,
            phrases: PhraseSection::default(),
            training,
            analysis: AnalysisSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML config. Relative paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.store.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.phrases.seeds.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    /// Training settings with the run-level seed and thread count applied.
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seed,
            threads: self.threads,
            ..self.training.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.training().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        let p = &self.phrases;
        if !(p.delta >= 0.0 && p.delta.is_finite()) {
            return bad(format!("phrases.delta must be >= 0, got {}", p.delta));
        }
        if !p.threshold.is_finite() {
            return bad("phrases.threshold must be finite".into());
        }
        if p.passes == 0 {
            return bad("phrases.passes must be >= 1".into());
        }
        if let Some(seeds) = &p.seeds {
            if !seeds.is_file() {
                return bad(format!("seed list {} does not exist", seeds.display()));
            }
        }
        let a = &self.analysis;
        if a.k == 0 {
            return bad("analysis.k must be >= 1".into());
        }
        if a.min_run == 0 {
            return bad("analysis.min_run must be >= 1".into());
        }
        if !(0.0..1.0).contains(&a.threshold) {
            return bad(format!(
                "analysis.threshold must lie in [0, 1), got {}",
                a.threshold
            ));
        }
        if a.min_overlap < 2 {
            return bad("analysis.min_overlap must be >= 2".into());
        }
        Ok(())
    }

    /// Hash of the effective configuration, recorded in the run ledger.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&(self, self.training())).expect("config serializes");
        crate::corpus::sha256_hex(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_example_parses_to_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("driftscope.example.toml");
        let cfg = PipelineConfig::load(&path).unwrap();
        let defaults = PipelineConfig {
            store: cfg.store.clone(),
            ..Default::default()
        };
        assert_eq!(cfg, defaults);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(toml::from_str::<PipelineConfig>("colour = 1").is_err());
        assert!(toml::from_str::<PipelineConfig>("[training]\nseed = 3").is_err());
        let cfg: PipelineConfig = toml::from_str("[analysis]\nthreshold = 1.5").unwrap();
        assert!(cfg.validate().is_err());
        let cfg: PipelineConfig = toml::from_str("[phrases]\npasses = 0").unwrap();
        assert!(cfg.validate().is_err());
        let cfg: PipelineConfig = toml::from_str("threads = 0").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn run_level_seed_reaches_training() {
        let cfg: PipelineConfig = toml::from_str("seed = 9\nthreads = 3").unwrap();
        let t = cfg.training();
        assert_eq!((t.seed, t.threads), (9, 3));
    }
}
