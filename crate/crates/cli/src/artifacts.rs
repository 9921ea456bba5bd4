//! Artifact names and the output directory. Every write also refreshes
//! `manifest.json`, which maps artifact path to its SHA-256.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rct_core::analysis::Population;
use rct_core::corpus::{from_jsonl, ExclusionTally, SkippedRecord, Stimulus};
use rct_core::design::AllocationTable;
use rct_core::digest::sha256_hex;
use rct_core::harness::{read_log, TrialRecord};
use rct_core::similarity::{scores_from_jsonl, ScoredPair};

pub const CORPUS: &str = "corpus.jsonl";
pub const PREPARE_REPORT: &str = "prepare_report.json";
pub const ALLOCATION: &str = "allocation.csv";
pub const RANDOMIZATION: &str = "randomization.json";
pub const BALANCE: &str = "balance.json";
pub const TRIALS: &str = "trials.jsonl";
pub const BASELINE: &str = "baseline.jsonl";
pub const SIMILARITY: &str = "similarity.jsonl";
pub const SIMILARITY_REPORT: &str = "similarity_report.json";
pub const CONSORT: &str = "consort.json";
pub const SENSITIVITY: &str = "sensitivity.json";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";
pub const MANIFEST: &str = "manifest.json";

pub fn results_name(population: Population) -> String {
    format!("results-{}.json", population.label())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub assessed: usize,
    pub tally: ExclusionTally,
    pub skipped: Vec<SkippedRecord>,
    pub n_stimuli: usize,
    pub corpus_digest: String,
    /// Input path as configured, with the SHA-256 of its bytes.
    pub inputs: Vec<(String, String)>,
}

/// Which subcommand produces each input artifact, for error messages.
fn producer(name: &str) -> &'static str {
    match name {
        CORPUS | PREPARE_REPORT => "prepare",
        ALLOCATION => "randomize",
        TRIALS => "run",
        BASELINE => "run --control-baseline",
        SIMILARITY => "score-similarity",
        _ => "analyze",
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        // Write then rename so a crash never leaves a half-written artifact.
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("cannot write {}", path.display()))?;
        self.update_manifest(name, Some(sha256_hex(bytes)))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Refreshes the manifest entry of a file written by someone else.
    pub fn record_digest(&self, name: &str) -> Result<()> {
        let digest = match std::fs::read(self.path(name)) {
            Ok(bytes) => Some(sha256_hex(&bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e).with_context(|| format!("cannot read {}", self.path(name).display())),
        };
        self.update_manifest(name, digest)
    }

    fn update_manifest(&self, name: &str, digest: Option<String>) -> Result<()> {
        let path = self.path(MANIFEST);
        let mut manifest: BTreeMap<String, String> = match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).with_context(|| format!("corrupt {}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e).with_context(|| format!("cannot read {}", path.display())),
        };
        match digest {
            Some(d) => manifest.insert(name.to_string(), d),
            None => manifest.remove(name),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Reads an artifact that an earlier step must have produced.
    pub fn read_required(&self, name: &str, step: &str) -> Result<Vec<u8>> {
        let path = self.path(name);
        if !path.exists() {
            bail!("missing {}: run `rct {step}` first", path.display());
        }
        std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))
    }

    fn read_input(&self, name: &str) -> Result<Vec<u8>> {
        self.read_required(name, producer(name))
    }

    pub fn corpus(&self) -> Result<(Vec<Stimulus>, Vec<u8>)> {
        let bytes = self.read_input(CORPUS)?;
        let corpus = from_jsonl(&bytes).with_context(|| format!("cannot parse {}", self.path(CORPUS).display()))?;
        Ok((corpus, bytes))
    }

    pub fn allocation(&self) -> Result<AllocationTable> {
        let bytes = self.read_input(ALLOCATION)?;
        AllocationTable::from_csv(&bytes).with_context(|| format!("cannot parse {}", self.path(ALLOCATION).display()))
    }

    pub fn log(&self, name: &str) -> Result<Vec<TrialRecord>> {
        let path = self.path(name);
        if !path.exists() {
            bail!("missing {}: run `rct {}` first", path.display(), producer(name));
        }
        read_log(&path).with_context(|| format!("cannot read {}", path.display()))
    }

    pub fn log_if_present(&self, name: &str) -> Result<Vec<TrialRecord>> {
        if self.path(name).exists() {
            self.log(name)
        } else {
            Ok(Vec::new())
        }
    }

    pub fn scores_if_present(&self) -> Result<Vec<ScoredPair>> {
        let path = self.path(SIMILARITY);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let bytes = std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        scores_from_jsonl(&bytes).with_context(|| format!("cannot parse {}", path.display()))
    }
}
