//! Corpus preparation: ingestion, inclusion rules, deduplication, features
//! and the digest-stamped corpus file.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::digest::sha256_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Primary,
    Azure,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Primary => "primary",
            Source::Azure => "azure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub task_id: String,
    pub status: String,
    pub task_type: String,
    pub instruction: String,
    pub rework_count: u32,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tercile {
    Short,
    Medium,
    Long,
}

impl Tercile {
    pub const ALL: [Tercile; 3] = [Tercile::Short, Tercile::Medium, Tercile::Long];

    pub fn name(self) -> &'static str {
        match self {
            Tercile::Short => "short",
            Tercile::Medium => "medium",
            Tercile::Long => "long",
        }
    }
}

impl fmt::Display for Tercile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finalized experimental stimulus. Field order is the corpus file's key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub stimulus_id: String,
    pub instruction: String,
    pub task_type: String,
    pub source: Source,
    pub char_length: usize,
    pub est_tokens: usize,
    pub tercile: Tercile,
    pub rework_count: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionTally {
    pub too_short: usize,
    pub bad_status: usize,
    pub test_fixture: usize,
    pub duplicates: usize,
    pub retained: usize,
}

impl ExclusionTally {
    pub fn total(&self) -> usize {
        self.too_short + self.bad_status + self.test_fixture + self.duplicates + self.retained
    }

    pub fn excluded_by_criteria(&self) -> usize {
        self.too_short + self.bad_status + self.test_fixture
    }

    /// Folds a deduplication pass into the tally.
    pub fn record_duplicates(&mut self, removed: usize) {
        self.duplicates += removed;
        self.retained -= removed;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionCriteria {
    pub min_length: usize,
    pub allowed_statuses: Vec<String>,
    pub excluded_prefixes: Vec<String>,
}

impl Default for InclusionCriteria {
    fn default() -> Self {
        let prefixes = [
            "task-fail-",
            "task-consistency-",
            "task-values-",
            "task-error-",
            "task-exhausted-",
            "task-orch-",
            "task-engine-",
            "task-other-",
            "task-at-max-",
            "task-over-max-",
            "task-timeout-",
        ];
        InclusionCriteria {
            min_length: 20,
            allowed_statuses: vec!["completed".into(), "assigned".into()],
            excluded_prefixes: prefixes.iter().map(|p| p.to_string()).collect(),
        }
    }
}

/// An input file together with the environment its records come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub path: PathBuf,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<SkippedRecord>,
}

/// Number of Unicode scalar values.
pub fn char_length(text: &str) -> usize {
    text.chars().count()
}

/// Token estimate used throughout: four characters per token, rounded up.
pub fn estimate_tokens(chars: usize) -> usize {
    chars.div_ceil(4)
}

/// Stable identifier: first 16 hex characters of the instruction's SHA-256.
pub fn stimulus_id(instruction: &str) -> String {
    sha256_hex(instruction.as_bytes())[..16].to_string()
}

fn parse_record(value: &Value, source: Source) -> std::result::Result<RawRecord, String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let text = |field: &str| -> std::result::Result<String, String> {
        obj.get(field)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| format!("missing or non-string field `{field}`"))
    };
    let task_id = text("task_id")?;
    if task_id.is_empty() {
        return Err("empty `task_id`".into());
    }
    let rework_count = obj
        .get("rework_count")
        .and_then(Value::as_u64)
        .ok_or("missing or non-integer field `rework_count`")?;
    Ok(RawRecord {
        task_id,
        status: text("status")?,
        task_type: text("task_type")?,
        instruction: text("instruction")?,
        rework_count: u32::try_from(rework_count).map_err(|_| "rework_count out of range")?,
        source,
    })
}

/// Parses records from an in-memory JSON array, tagging each with `source`.
pub fn parse_records(bytes: &[u8], path: &Path, source: Source, report: &mut LoadReport) -> Result<()> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let items = value.as_array().ok_or_else(|| Error::Ingest {
        path: path.to_path_buf(),
        reason: "top-level value is not a JSON array".into(),
    })?;
    for (index, item) in items.iter().enumerate() {
        match parse_record(item, source) {
            Ok(record) => report.records.push(record),
            Err(reason) => report.skipped.push(SkippedRecord {
                path: path.to_path_buf(),
                index,
                reason,
            }),
        }
    }
    Ok(())
}

/// Loads every file in argument order; malformed records are skipped and reported.
pub fn load_records(files: &[SourceFile]) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    for file in files {
        let bytes = std::fs::read(&file.path).map_err(|e| Error::Ingest {
            path: file.path.clone(),
            reason: e.to_string(),
        })?;
        parse_records(&bytes, &file.path, file.source, &mut report)?;
    }
    Ok(report)
}

/// Filters by length, then status, then task-id prefix; each excluded record
/// is tallied under the first rule it fails.
pub fn apply_inclusion(records: Vec<RawRecord>, criteria: &InclusionCriteria) -> (Vec<RawRecord>, ExclusionTally) {
    let mut tally = ExclusionTally::default();
    let mut kept = Vec::with_capacity(records.len());
    for record in records {
        if char_length(&record.instruction) < criteria.min_length {
            tally.too_short += 1;
        } else if !criteria.allowed_statuses.contains(&record.status) {
            tally.bad_status += 1;
        } else if criteria
            .excluded_prefixes
            .iter()
            .any(|p| record.task_id.starts_with(p.as_str()))
        {
            tally.test_fixture += 1;
        } else {
            kept.push(record);
        }
    }
    tally.retained = kept.len();
    (kept, tally)
}

/// Keeps the first occurrence of each exact instruction string.
pub fn deduplicate(records: Vec<RawRecord>) -> (Vec<RawRecord>, usize) {
    let before = records.len();
    let mut seen = HashSet::new();
    let kept: Vec<RawRecord> = records
        .into_iter()
        .filter(|r| seen.insert(r.instruction.clone()))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Tercile cut values over a length distribution: nearest-rank at one and
/// two thirds of the sorted lengths.
pub fn tercile_cuts(lengths: &[usize]) -> Result<(usize, usize)> {
    let n = lengths.len();
    if n < 3 {
        return Err(Error::TooFewForTerciles(n));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let rank = |k: usize| (n * k).div_ceil(3);
    Ok((sorted[rank(1) - 1], sorted[rank(2) - 1]))
}

pub fn classify_tercile(length: usize, cuts: (usize, usize)) -> Tercile {
    if length <= cuts.0 {
        Tercile::Short
    } else if length <= cuts.1 {
        Tercile::Medium
    } else {
        Tercile::Long
    }
}

pub fn finalize_corpus(records: Vec<RawRecord>) -> Result<Vec<Stimulus>> {
    let lengths: Vec<usize> = records.iter().map(|r| char_length(&r.instruction)).collect();
    let cuts = tercile_cuts(&lengths)?;
    Ok(records
        .into_iter()
        .zip(lengths)
        .map(|(r, len)| Stimulus {
            stimulus_id: stimulus_id(&r.instruction),
            est_tokens: estimate_tokens(len),
            tercile: classify_tercile(len, cuts),
            char_length: len,
            instruction: r.instruction,
            task_type: r.task_type,
            source: r.source,
            rework_count: r.rework_count,
        })
        .collect())
}

/// Result of the full preparation pipeline.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub stimuli: Vec<Stimulus>,
    pub tally: ExclusionTally,
    pub assessed: usize,
}

/// Inclusion, deduplication and finalization in one pass.
pub fn prepare(records: Vec<RawRecord>, criteria: &InclusionCriteria) -> Result<PreparedCorpus> {
    let assessed = records.len();
    let (included, mut tally) = apply_inclusion(records, criteria);
    let (unique, removed) = deduplicate(included);
    tally.record_duplicates(removed);
    let stimuli = finalize_corpus(unique)?;
    Ok(PreparedCorpus {
        stimuli,
        tally,
        assessed,
    })
}

/// JSONL serialization, one stimulus per line.
pub fn to_jsonl(stimuli: &[Stimulus]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in stimuli {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn from_jsonl(bytes: &[u8]) -> Result<Vec<Stimulus>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Serialization(format!("corpus line {}: {e}", i + 1))))
        .collect()
}

/// Lowercase hex SHA-256 of the exact corpus file bytes.
pub fn corpus_digest(corpus_file_bytes: &[u8]) -> String {
    sha256_hex(corpus_file_bytes)
}
