//! Toolkit for running randomized controlled trials of prompt-compression
//! policies against language-model backends.
//!
//! The pipeline stages map onto modules:
//!
//! * [`corpus`] ingests raw task records, applies inclusion rules,
//!   deduplicates and assigns length terciles.
//! * [`compression`] implements the uniform, entropy-adaptive and
//!   recency-weighted word-boundary compressors.
//! * [`cost`] holds the input/output cost model and break-even bound.
//! * [`design`] does stratified permuted-block randomization with a
//!   balance gate and constrained rerandomization.
//! * [`harness`] executes trials with rate limiting, retries and a
//!   resumable JSONL log.
//! * [`similarity`] scores treatment responses against control baselines.
//! * [`stats`] is the statistical test library used by the gate and the
//!   analysis.
//! * [`analysis`] runs the hypothesis suite and emits tables.
//! * [`synth`] builds synthetic fixtures shaped to reference summaries.

pub mod analysis;
pub mod arm;
pub mod compression;
pub mod corpus;
pub mod cost;
pub mod design;
pub mod digest;
mod error;
pub mod harness;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use arm::Arm;
pub use error::{Error, Result};

/// Version string embedded in results documents.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
