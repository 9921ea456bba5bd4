//! Response similarity between treatment responses and matched control
//! baselines.
//!
//! Scoring tries embedding cosine first and falls back to Jaccard overlap of
//! whitespace tokens. The slot between them, a neural token-matching score,
//! is reserved but not implemented, so the fallback goes straight from
//! embeddings to Jaccard. Every score carries the method that produced it.

mod cache;
mod provider;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use cache::{CachedProvider, EmbeddingCache};
pub use provider::{EmbeddingError, EmbeddingProvider, HttpEmbeddingConfig, HttpEmbeddingProvider};

use crate::harness::TrialRecord;
use crate::{Arm, Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMethod {
    EmbeddingCosine,
    Jaccard,
}

impl SimilarityMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityMethod::EmbeddingCosine => "embedding_cosine",
            SimilarityMethod::Jaccard => "jaccard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub method: SimilarityMethod,
    pub preserved: bool,
    /// Why the embedding tier was not used, when it was not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePair {
    pub stimulus_id: String,
    pub arm: Arm,
    pub treatment_response: String,
    pub control_response: String,
}

/// One line of the score output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub stimulus_id: String,
    pub arm: Arm,
    pub value: f64,
    pub method: SimilarityMethod,
    pub preserved: bool,
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidParameter(format!(
            "cosine of vectors with dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(nu > 0.0 && nv > 0.0) || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::DegenerateInput(
            "cosine of a zero-norm or non-finite vector".into(),
        ));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Jaccard overlap of whitespace-token sets; two empty texts score 1.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<&str> = a.split_whitespace().collect();
    let sb: BTreeSet<&str> = b.split_whitespace().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn embed_checked(provider: &dyn EmbeddingProvider, text: &str) -> std::result::Result<Vec<f64>, String> {
    let v = provider.embed(text).map_err(|e| e.to_string())?;
    if v.len() != provider.dimension() {
        return Err(format!("expected dimension {}, got {}", provider.dimension(), v.len()));
    }
    Ok(v.into_iter().map(f64::from).collect())
}

/// Scores one pair. Never fails: any provider problem degrades to Jaccard
/// with the cause recorded.
pub fn score_pair(pair: &ResponsePair, provider: Option<&dyn EmbeddingProvider>, threshold: f64) -> SimilarityScore {
    let reason = match provider {
        None => "no embedding provider configured".to_string(),
        Some(p) => {
            let attempt = embed_checked(p, &pair.treatment_response)
                .and_then(|u| embed_checked(p, &pair.control_response).map(|v| (u, v)))
                .and_then(|(u, v)| cosine(&u, &v).map_err(|e| e.to_string()));
            match attempt {
                Ok(value) => {
                    return SimilarityScore {
                        value,
                        method: SimilarityMethod::EmbeddingCosine,
                        preserved: value >= threshold,
                        fallback_reason: None,
                    }
                }
                Err(e) => e,
            }
        }
    };
    let value = jaccard(&pair.treatment_response, &pair.control_response);
    SimilarityScore {
        value,
        method: SimilarityMethod::Jaccard,
        preserved: value >= threshold,
        fallback_reason: Some(reason),
    }
}

pub fn score_pairs(
    pairs: &[ResponsePair],
    provider: Option<&dyn EmbeddingProvider>,
    threshold: f64,
) -> Vec<(ScoredPair, Option<String>)> {
    pairs
        .iter()
        .map(|p| {
            let s = score_pair(p, provider, threshold);
            (
                ScoredPair {
                    stimulus_id: p.stimulus_id.clone(),
                    arm: p.arm,
                    value: s.value,
                    method: s.method,
                    preserved: s.preserved,
                },
                s.fallback_reason,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub pairs: Vec<ResponsePair>,
    /// Successful treatment stimuli with no successful control baseline.
    pub unmatched: Vec<String>,
}

fn successes_by_id<'a>(log: &'a [TrialRecord], which: &str) -> Result<HashMap<&'a str, &'a TrialRecord>> {
    let mut out = HashMap::new();
    for r in log.iter().filter(|r| r.is_success()) {
        if out.insert(r.stimulus_id.as_str(), r).is_some() {
            return Err(Error::LogCorruption {
                line: 0,
                reason: format!("{which} log has two successful records for {}", r.stimulus_id),
            });
        }
    }
    Ok(out)
}

/// Inner join of successful treatment records (control-arm rows excluded,
/// their similarity is 1 by definition) with the control baseline log.
pub fn build_pairs(treatment_log: &[TrialRecord], control_log: &[TrialRecord]) -> Result<Pairing> {
    let controls = successes_by_id(control_log, "control baseline")?;
    successes_by_id(treatment_log, "treatment")?;
    let mut pairing = Pairing::default();
    let mut seen = HashSet::new();
    for t in treatment_log.iter().filter(|r| r.is_success() && r.arm != Arm::Control) {
        if !seen.insert(t.stimulus_id.as_str()) {
            continue;
        }
        match controls.get(t.stimulus_id.as_str()) {
            Some(c) => pairing.pairs.push(ResponsePair {
                stimulus_id: t.stimulus_id.clone(),
                arm: t.arm,
                treatment_response: t.response_text.clone().unwrap_or_default(),
                control_response: c.response_text.clone().unwrap_or_default(),
            }),
            None => pairing.unmatched.push(t.stimulus_id.clone()),
        }
    }
    Ok(pairing)
}

pub fn scores_to_jsonl(scores: &[ScoredPair]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in scores {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn scores_from_jsonl(bytes: &[u8]) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        out.push(serde_json::from_slice(line).map_err(|e| Error::Serialization(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
