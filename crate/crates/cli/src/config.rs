//! The JSON run configuration. Every section has defaults, so a subcommand
//! only fails on the fields it actually needs. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use rct_core::analysis::AnalysisConfig;
use rct_core::corpus::{InclusionCriteria, Source};
use rct_core::design::BalanceCriteria;
use rct_core::harness::http::HttpBackendConfig;
use rct_core::harness::{InferenceConfig, SimulatedModelSpec};
use rct_core::similarity::{HttpEmbeddingConfig, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub randomization: RandomizationSection,
    pub inference: InferenceSection,
    pub similarity: SimilaritySection,
    pub analysis: AnalysisConfig,
    /// Relative to the config file.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: PathBuf,
    pub source: Source,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Read in order; earlier files win deduplication.
    pub inputs: Vec<InputFile>,
    pub inclusion: InclusionCriteria,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationSection {
    pub seed0: u64,
    pub max_attempts: u64,
    pub alpha: f64,
    pub smd_cap: f64,
}

impl Default for RandomizationSection {
    fn default() -> Self {
        let c = BalanceCriteria::default();
        RandomizationSection {
            seed0: 0,
            max_attempts: 1000,
            alpha: c.alpha,
            smd_cap: c.smd_cap,
        }
    }
}

impl RandomizationSection {
    pub fn criteria(&self) -> BalanceCriteria {
        BalanceCriteria {
            alpha: self.alpha,
            smd_cap: self.smd_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Simulated,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    pub params: InferenceConfig,
    pub backend: BackendKind,
    pub simulated: SimulatedModelSpec,
    /// Start of the virtual clock used with the simulated backend.
    pub simulated_start: DateTime<Utc>,
    pub http: Option<HttpBackendConfig>,
    pub workers: usize,
}

impl Default for InferenceSection {
    fn default() -> Self {
        InferenceSection {
            params: InferenceConfig::default(),
            backend: BackendKind::Simulated,
            simulated: SimulatedModelSpec::default(),
            simulated_start: Utc.with_ymd_and_hms(2026, 1, 15, 9, 0, 0).single().expect("valid date"),
            http: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Lexical overlap only.
    #[default]
    Jaccard,
    /// Embedding cosine with Jaccard fallback.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilaritySection {
    pub threshold: f64,
    pub provider: ProviderKind,
    pub embedding: Option<HttpEmbeddingConfig>,
    /// Relative to the config file.
    pub cache_dir: Option<PathBuf>,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        SimilaritySection {
            threshold: DEFAULT_THRESHOLD,
            provider: ProviderKind::Jaccard,
            embedding: None,
            cache_dir: None,
        }
    }
}

/// A loaded configuration and the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Loaded {
                config: RunConfig::default(),
                base: PathBuf::from("."),
            });
        };
        let bytes = std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_slice(&bytes).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

/// Checks the fields a subcommand depends on, naming the offending one.
pub fn require_inputs(config: &RunConfig) -> Result<()> {
    if config.corpus.inputs.is_empty() {
        bail!("config field corpus.inputs must list at least one input file");
    }
    Ok(())
}
