use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("tercile computation needs at least 3 stimuli, got {0}")]
    TooFewForTerciles(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined baseline: {0}")]
    UndefinedBaseline(String),

    #[error("insufficient data for {test}: {reason}")]
    InsufficientData { test: String, reason: String },

    #[error("no balanced allocation within {attempts} attempts (best seed {best_seed} failed: {failing})", failing = failing.join(", "))]
    NoBalancedAllocation {
        attempts: u64,
        best_seed: u64,
        failing: Vec<String>,
    },

    #[error("log corrupted at line {line}: {reason}")]
    LogCorruption { line: usize, reason: String },

    #[error("log write failed: {0}")]
    LogWrite(#[source] std::io::Error),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
