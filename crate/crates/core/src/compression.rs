//! Word-boundary compression strategies.
//!
//! Every strategy keeps whole words: a word is a maximal run of
//! non-whitespace characters, and outputs never contain a token that was not
//! a token of the input. Budgets are counted in Unicode scalar values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower and upper bounds applied to every per-segment target.
pub const SEGMENT_TARGET_MIN: f64 = 0.1;
pub const SEGMENT_TARGET_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    Uniform,
    Adaptive,
    Recency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionSpec {
    pub strategy: Strategy,
    pub target_r: f64,
    pub chunk_chars: usize,
}

impl CompressionSpec {
    pub fn new(strategy: Strategy, target_r: f64, chunk_chars: usize) -> Result<Self> {
        if !(target_r > 0.0 && target_r <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target retention {target_r} not in (0, 1]"
            )));
        }
        if strategy == Strategy::None && target_r != 1.0 {
            return Err(Error::InvalidParameter("strategy `none` requires r = 1".into()));
        }
        if chunk_chars == 0 {
            return Err(Error::InvalidParameter("chunk_chars must be at least 1".into()));
        }
        Ok(CompressionSpec {
            strategy,
            target_r,
            chunk_chars,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub label: String,
    pub target_r: f64,
    pub realized_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionOutcome {
    pub compressed_text: String,
    pub original_chars: usize,
    pub retained_chars: usize,
    pub realized_ratio: f64,
    pub per_segment: Vec<SegmentOutcome>,
}

impl CompressionOutcome {
    fn new(compressed_text: String, original_chars: usize, per_segment: Vec<SegmentOutcome>) -> Self {
        let retained_chars = compressed_text.chars().count();
        CompressionOutcome {
            realized_ratio: retained_chars as f64 / original_chars as f64,
            compressed_text,
            original_chars,
            retained_chars,
            per_segment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub chunk_entropies: Vec<f64>,
    pub median_entropy: f64,
}

pub fn clamp_target(r: f64) -> f64 {
    r.clamp(SEGMENT_TARGET_MIN, SEGMENT_TARGET_MAX)
}

/// Character budget `ceil(r * len)`. The small offset keeps products such as
/// `0.7 * 10` from rounding up past the exact integer.
fn budget(r: f64, len: usize) -> usize {
    let raw = r * len as f64;
    ((raw - 1e-9).ceil().max(0.0)) as usize
}

/// Char-index end positions of each word.
fn word_ends(chars: &[char]) -> Vec<usize> {
    let mut ends = Vec::new();
    for i in 0..chars.len() {
        let is_end = !chars[i].is_whitespace() && (i + 1 == chars.len() || chars[i + 1].is_whitespace());
        if is_end {
            ends.push(i + 1);
        }
    }
    ends
}

fn check_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::DegenerateInput("text has no words".into()));
    }
    Ok(())
}

pub fn compress(text: &str, spec: &CompressionSpec) -> Result<CompressionOutcome> {
    check_text(text)?;
    Ok(match spec.strategy {
        Strategy::None => CompressionOutcome::new(text.to_string(), text.chars().count(), Vec::new()),
        Strategy::Uniform => truncate_words(text, spec.target_r),
        Strategy::Adaptive => adaptive_compress(text, spec.target_r, spec.chunk_chars)?,
        Strategy::Recency => recency_compress(text, spec.target_r)?,
    })
}

/// Keeps the longest whole-word prefix whose length fits in `ceil(r * len)`
/// characters, and never less than the first word.
pub fn uniform_truncate(text: &str, r: f64) -> Result<CompressionOutcome> {
    check_text(text)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("target retention {r} not in (0, 1]")));
    }
    Ok(truncate_words(text, r))
}

fn truncate_words(text: &str, r: f64) -> CompressionOutcome {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let b = budget(r, n);
    if b >= n {
        return CompressionOutcome::new(text.to_string(), n, Vec::new());
    }
    let ends = word_ends(&chars);
    let end = ends.iter().copied().take_while(|&e| e <= b).last().unwrap_or(ends[0]);
    CompressionOutcome::new(chars[..end].iter().collect(), n, Vec::new())
}

/// Shannon entropy in bits per character of the chunk's character distribution.
pub fn shannon_entropy(chunk: &str) -> f64 {
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    let mut total = 0usize;
    for c in chunk.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .values()
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    }
}

fn is_boundary(chars: &[char], p: usize) -> bool {
    p == 0 || p >= chars.len() || chars[p - 1].is_whitespace() || chars[p].is_whitespace()
}

fn snap_forward(chars: &[char], mut p: usize) -> usize {
    while !is_boundary(chars, p) {
        p += 1;
    }
    p
}

/// Consecutive chunks of roughly `chunk_chars` characters, each extended to
/// the end of the word it would otherwise split. Whitespace between chunks is
/// dropped.
fn chunk_spans(chars: &[char], chunk_chars: usize) -> Vec<(usize, usize)> {
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0;
    loop {
        while start < n && chars[start].is_whitespace() {
            start += 1;
        }
        if start >= n {
            break;
        }
        let end = snap_forward(chars, (start + chunk_chars).min(n));
        spans.push((start, end));
        start = end;
    }
    spans
}

fn span_text(chars: &[char], (start, end): (usize, usize)) -> String {
    chars[start..end].iter().collect::<String>().trim().to_string()
}

pub fn entropy_profile(text: &str, chunk_chars: usize) -> EntropyProfile {
    let chars: Vec<char> = text.chars().collect();
    let chunk_entropies: Vec<f64> = chunk_spans(&chars, chunk_chars.max(1))
        .into_iter()
        .map(|span| shannon_entropy(&span_text(&chars, span)))
        .collect();
    let median_entropy = if chunk_entropies.is_empty() {
        0.0
    } else {
        median(&chunk_entropies)
    };
    EntropyProfile {
        chunk_entropies,
        median_entropy,
    }
}

/// Truncates each labelled segment at its own target and rejoins survivors
/// with single spaces.
fn compress_segments(original_chars: usize, segments: Vec<(String, String, f64)>) -> CompressionOutcome {
    let mut pieces = Vec::new();
    let mut per_segment = Vec::new();
    for (label, text, target) in segments {
        if text.is_empty() {
            continue;
        }
        let out = truncate_words(&text, target);
        per_segment.push(SegmentOutcome {
            label,
            target_r: target,
            realized_r: out.realized_ratio,
        });
        pieces.push(out.compressed_text);
    }
    CompressionOutcome::new(pieces.join(" "), original_chars, per_segment)
}

/// Entropy-adaptive budgeting: chunks below the median entropy get `r/2`,
/// chunks at or above it get `1.5 r`, both clamped to `[0.1, 1.0]`.
pub fn adaptive_compress(text: &str, r: f64, chunk_chars: usize) -> Result<CompressionOutcome> {
    check_text(text)?;
    if chunk_chars == 0 {
        return Err(Error::InvalidParameter("chunk_chars must be at least 1".into()));
    }
    let chars: Vec<char> = text.chars().collect();
    let chunks: Vec<String> = chunk_spans(&chars, chunk_chars)
        .into_iter()
        .map(|span| span_text(&chars, span))
        .collect();
    let entropies: Vec<f64> = chunks.iter().map(|c| shannon_entropy(c)).collect();
    let med = median(&entropies);
    let segments = chunks
        .into_iter()
        .zip(entropies)
        .enumerate()
        .map(|(i, (chunk, h))| {
            let target = if h < med {
                clamp_target(r / 2.0)
            } else {
                clamp_target(r * 1.5)
            };
            (format!("chunk-{i}"), chunk, target)
        })
        .collect();
    Ok(compress_segments(chars.len(), segments))
}

/// Recency weighting: preamble (first 20%) at `r/2`, body at `r`, recent
/// context (last 20%) at `1.5 r`, each clamped to `[0.1, 1.0]`. Cut points
/// move forward to the next word boundary.
pub fn recency_compress(text: &str, r: f64) -> Result<CompressionOutcome> {
    check_text(text)?;
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let first = snap_forward(&chars, n / 5);
    let second = snap_forward(&chars, (4 * n / 5).max(first));
    let segments = vec![
        (
            "preamble".to_string(),
            span_text(&chars, (0, first)),
            clamp_target(r / 2.0),
        ),
        ("body".to_string(), span_text(&chars, (first, second)), clamp_target(r)),
        (
            "recent".to_string(),
            span_text(&chars, (second, n)),
            clamp_target(r * 1.5),
        ),
    ];
    Ok(compress_segments(n, segments))
}
