//! Append-only JSONL trial log.
//!
//! Each record is serialized to one line and written with a single
//! `write_all` once its trial has concluded. A trailing fragment without a
//! newline is an interrupted write: readers ignore it and [`TrialLog::open`]
//! truncates it before appending.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::backend::ErrorKind;
use crate::compression::Strategy;
use crate::cost::CostBreakdown;
use crate::{Arm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailedAfterRetries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub stimulus_id: String,
    pub arm: Arm,
    pub strategy: Strategy,
    pub target_r: f64,
    pub realized_ratio: f64,
    /// SHA-256 of the prompt actually sent.
    pub compressed_digest: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub cost: CostBreakdown,
    pub latency_ms: Option<u64>,
    pub outcome: Outcome,
    pub error_kind: Option<ErrorKind>,
    pub response_text: Option<String>,
    pub attempt_timestamps: Vec<DateTime<Utc>>,
}

impl TrialRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

pub struct TrialLog {
    sink: Box<dyn Write + Send>,
}

impl TrialLog {
    /// Opens `path` for appending, creating it if needed and dropping any
    /// uncommitted trailing fragment.
    pub fn open(path: &Path) -> Result<Self> {
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(path, e))?;
            let committed = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            if committed < bytes.len() {
                OpenOptions::new()
                    .write(true)
                    .open(path)
                    .and_then(|f| f.set_len(committed as u64))
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(TrialLog { sink: Box::new(file) })
    }

    /// Log over an arbitrary sink; used to exercise write failures.
    pub fn from_writer(sink: impl Write + Send + 'static) -> Self {
        TrialLog { sink: Box::new(sink) }
    }

    pub fn append(&mut self, record: &TrialRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.sink.write_all(&line).map_err(Error::LogWrite)?;
        self.sink.flush().map_err(Error::LogWrite)
    }
}

/// Parses committed records. Blank lines are skipped; an unparseable complete
/// line is corruption.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<TrialRecord>> {
    let committed = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in bytes[..committed].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let rec = serde_json::from_slice(line).map_err(|e| Error::LogCorruption {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a log file; a missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<TrialRecord>> {
    match std::fs::read(path) {
        Ok(bytes) => parse_log(&bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(PathBuf::from(path), e)),
    }
}

/// Latest record per stimulus (a retried failure is superseded by its
/// retry), in order of each stimulus's first appearance.
pub fn latest_by_stimulus(records: &[TrialRecord]) -> Vec<TrialRecord> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<TrialRecord> = Vec::new();
    for r in records {
        match slot.get(r.stimulus_id.as_str()) {
            Some(&i) => out[i] = r.clone(),
            None => {
                slot.insert(&r.stimulus_id, out.len());
                out.push(r.clone());
            }
        }
    }
    out
}
