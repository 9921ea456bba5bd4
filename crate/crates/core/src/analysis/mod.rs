//! Hypothesis analyses, Pareto frontier, missingness diagnostics, assignment
//! sensitivity, CONSORT counts and table rendering.

mod missingness;
mod sensitivity;
mod suite;
pub mod tables;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use missingness::{missingness_report, ArmMissingness, CompositionRow, HourlyRow, MissingnessReport, TercileRate};
pub use sensitivity::{assignment_sensitivity, consort_counts, ConsortFlow, SensitivityRow};
pub use suite::{
    hypothesis_suite, AnalysisConfig, AnalysisInput, HypothesisResult, HypothesisStatus, NamedEstimate, NamedTest,
    ResultsDocument, SimilarityRow,
};

use crate::cost::savings;
use crate::harness::{latest_by_stimulus, TrialRecord};
use crate::similarity::ScoredPair;
use crate::{Arm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Population {
    /// Successful trials only.
    #[default]
    #[serde(rename = "complete-case")]
    CompleteCase,
    /// Every submitted trial; cost outcomes use observed cost, token
    /// outcomes use the records that carry token counts.
    #[serde(rename = "all")]
    AllSubmitted,
}

impl Population {
    pub fn label(self) -> &'static str {
        match self {
            Population::CompleteCase => "complete-case",
            Population::AllSubmitted => "all",
        }
    }
}

impl std::str::FromStr for Population {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "complete-case" => Ok(Population::CompleteCase),
            "all" => Ok(Population::AllSubmitted),
            _ => Err(format!("unknown population `{s}` (expected complete-case or all)")),
        }
    }
}

/// Latest record per stimulus, restricted to `population`.
pub fn population_records(log: &[TrialRecord], population: Population) -> Vec<TrialRecord> {
    let latest = latest_by_stimulus(log);
    match population {
        Population::CompleteCase => latest.into_iter().filter(TrialRecord::is_success).collect(),
        Population::AllSubmitted => latest,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub n: usize,
    /// Over records carrying token counts; `None` if there are none.
    pub mean_in_tokens: Option<f64>,
    pub mean_out_tokens: Option<f64>,
    pub mean_cost: f64,
    pub total_cost: f64,
    pub mean_latency_ms: Option<f64>,
    pub mean_realized_ratio: f64,
    /// Fractional savings of the arm mean cost against control; positive is cheaper.
    pub savings: Option<f64>,
    /// One-sided bootstrap p for mean per-trial savings <= 0.
    pub net_savings_p: Option<f64>,
    pub mean_similarity: Option<f64>,
    pub pct_preserved: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-arm means over the given records, in arm order. Arms with no records
/// are omitted. Savings need a control arm with positive mean cost.
pub fn arm_summaries(records: &[TrialRecord], scores: &[ScoredPair]) -> Result<Vec<ArmSummary>> {
    let mut by_arm: BTreeMap<Arm, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_arm.entry(r.arm).or_default().push(r);
    }
    let mut sim: HashMap<Arm, Vec<&ScoredPair>> = HashMap::new();
    for s in scores {
        sim.entry(s.arm).or_default().push(s);
    }
    let mut out = Vec::new();
    for (&arm, recs) in &by_arm {
        let total_cost: f64 = recs.iter().map(|r| r.cost.total_f64()).sum();
        let arm_scores = sim.get(&arm).map(Vec::as_slice).unwrap_or(&[]);
        let (mean_similarity, pct_preserved) = if arm == Arm::Control {
            (Some(1.0), Some(100.0))
        } else if arm_scores.is_empty() {
            (None, None)
        } else {
            (
                mean(arm_scores.iter().map(|s| s.value)),
                Some(100.0 * arm_scores.iter().filter(|s| s.preserved).count() as f64 / arm_scores.len() as f64),
            )
        };
        out.push(ArmSummary {
            arm,
            n: recs.len(),
            mean_in_tokens: mean(recs.iter().filter_map(|r| r.input_tokens).map(|t| t as f64)),
            mean_out_tokens: mean(recs.iter().filter_map(|r| r.output_tokens).map(|t| t as f64)),
            mean_cost: total_cost / recs.len() as f64,
            total_cost,
            mean_latency_ms: mean(recs.iter().filter_map(|r| r.latency_ms).map(|t| t as f64)),
            mean_realized_ratio: mean(recs.iter().map(|r| r.realized_ratio)).unwrap_or(f64::NAN),
            savings: None,
            net_savings_p: None,
            mean_similarity,
            pct_preserved,
        });
    }
    if let Some(control) = out.iter().find(|s| s.arm == Arm::Control).map(|s| s.mean_cost) {
        for s in &mut out {
            if s.arm != Arm::Control {
                s.savings = Some(savings(control, s.mean_cost)?);
            }
        }
    }
    Ok(out)
}

/// Like [`arm_summaries`] but fails when there is no control arm.
pub fn arm_summaries_with_control(records: &[TrialRecord], scores: &[ScoredPair]) -> Result<Vec<ArmSummary>> {
    if !records.iter().any(|r| r.arm == Arm::Control) {
        return Err(Error::UndefinedBaseline(
            "no control-arm trials; savings are undefined".into(),
        ));
    }
    arm_summaries(records, scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub arm: Arm,
    pub mean_cost: f64,
    pub mean_similarity: f64,
    pub dominated: bool,
}

/// `a` dominates `b`: no worse on both axes (cost lower is better,
/// similarity higher is better) and strictly better on one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1)
}

/// Strict-dominance filter over `(arm, cost, similarity)` points. Control is
/// a reference, not a candidate, unless `include_control` is set.
pub fn pareto_frontier(points: &[(Arm, f64, f64)], include_control: bool) -> Vec<ParetoPoint> {
    let candidates: Vec<_> = points
        .iter()
        .filter(|p| include_control || p.0 != Arm::Control)
        .collect();
    candidates
        .iter()
        .map(|&&(arm, cost, sim)| ParetoPoint {
            arm,
            mean_cost: cost,
            mean_similarity: sim,
            dominated: candidates.iter().any(|&&(_, c, s)| dominates((c, s), (cost, sim))),
        })
        .collect()
}
