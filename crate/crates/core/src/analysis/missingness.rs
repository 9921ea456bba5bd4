use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, DurationRound, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Stimulus, Tercile};
use crate::design::AllocationTable;
use crate::harness::{latest_by_stimulus, TrialRecord};
use crate::stats::{mean, median};
use crate::{Arm, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMissingness {
    pub arm: Arm,
    pub allocated: usize,
    pub submitted: usize,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileRate {
    pub tercile: Tercile,
    pub submitted: usize,
    pub succeeded: usize,
    pub success_rate: f64,
}

/// Trials whose first attempt fell in the UTC hour starting at `hour_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyRow {
    pub hour_start: DateTime<Utc>,
    pub submitted: usize,
    pub succeeded: usize,
    pub success_rate: f64,
}

/// Full randomized set against the complete-case set. Category rows carry
/// counts and percentages; summary rows (mean, median) carry values only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub metric: String,
    pub full_n: Option<usize>,
    pub full_value: f64,
    pub complete_n: Option<usize>,
    pub complete_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub per_arm: Vec<ArmMissingness>,
    pub per_tercile: Vec<TercileRate>,
    pub hourly: Vec<HourlyRow>,
    pub composition: Vec<CompositionRow>,
    pub full_n: usize,
    pub complete_n: usize,
}

fn rate(succeeded: usize, submitted: usize) -> f64 {
    if submitted == 0 {
        0.0
    } else {
        100.0 * succeeded as f64 / submitted as f64
    }
}

/// Success accounting over the allocation, using the latest record per stimulus.
pub fn missingness_report(
    alloc: &AllocationTable,
    corpus: &[Stimulus],
    log: &[TrialRecord],
) -> Result<MissingnessReport> {
    let latest = latest_by_stimulus(log);
    let by_id: HashMap<&str, &TrialRecord> = latest.iter().map(|r| (r.stimulus_id.as_str(), r)).collect();
    if let Some(r) = latest.iter().find(|r| alloc.arm_of(&r.stimulus_id).is_none()) {
        return Err(Error::Inconsistent(format!(
            "logged stimulus {} is not in the allocation",
            r.stimulus_id
        )));
    }
    let stimuli: HashMap<&str, &Stimulus> = corpus.iter().map(|s| (s.stimulus_id.as_str(), s)).collect();

    let mut per_arm: BTreeMap<Arm, ArmMissingness> = Arm::ALL
        .iter()
        .map(|&arm| {
            (
                arm,
                ArmMissingness {
                    arm,
                    allocated: 0,
                    submitted: 0,
                    succeeded: 0,
                    failed: 0,
                },
            )
        })
        .collect();
    let mut terciles: BTreeMap<Tercile, (usize, usize)> = Tercile::ALL.iter().map(|&t| (t, (0, 0))).collect();
    let mut hourly: BTreeMap<DateTime<Utc>, (usize, usize)> = BTreeMap::new();
    let mut full: Vec<&Stimulus> = Vec::new();
    let mut complete: Vec<&Stimulus> = Vec::new();

    for row in alloc.rows() {
        let cell = per_arm.get_mut(&row.arm).expect("all arms present");
        cell.allocated += 1;
        let stimulus = stimuli.get(row.stimulus_id.as_str()).ok_or_else(|| {
            Error::Inconsistent(format!("allocated stimulus {} is not in the corpus", row.stimulus_id))
        })?;
        full.push(stimulus);
        let Some(rec) = by_id.get(row.stimulus_id.as_str()) else {
            continue;
        };
        let ok = rec.is_success();
        cell.submitted += 1;
        if ok {
            cell.succeeded += 1;
            complete.push(stimulus);
        } else {
            cell.failed += 1;
        }
        let t = terciles.get_mut(&row.tercile).expect("all terciles present");
        t.0 += 1;
        t.1 += ok as usize;
        if let Some(first) = rec.attempt_timestamps.first() {
            let hour = first
                .duration_trunc(TimeDelta::hours(1))
                .map_err(|e| Error::Inconsistent(format!("timestamp {first}: {e}")))?;
            let h = hourly.entry(hour).or_default();
            h.0 += 1;
            h.1 += ok as usize;
        }
    }

    Ok(MissingnessReport {
        per_arm: per_arm.into_values().collect(),
        per_tercile: terciles
            .into_iter()
            .map(|(tercile, (submitted, succeeded))| TercileRate {
                tercile,
                submitted,
                succeeded,
                success_rate: rate(succeeded, submitted),
            })
            .collect(),
        hourly: hourly
            .into_iter()
            .map(|(hour_start, (submitted, succeeded))| HourlyRow {
                hour_start,
                submitted,
                succeeded,
                success_rate: rate(succeeded, submitted),
            })
            .collect(),
        composition: composition(&full, &complete),
        full_n: full.len(),
        complete_n: complete.len(),
    })
}

fn composition(full: &[&Stimulus], complete: &[&Stimulus]) -> Vec<CompositionRow> {
    let tokens = |set: &[&Stimulus]| -> Vec<f64> { set.iter().map(|s| s.est_tokens as f64).collect() };
    let summary = |set: &[&Stimulus], f: fn(&[f64]) -> f64| {
        let v = tokens(set);
        if v.is_empty() {
            0.0
        } else {
            f(&v)
        }
    };
    let mut rows = vec![
        CompositionRow {
            metric: "mean input tokens (original)".into(),
            full_n: None,
            full_value: summary(full, mean),
            complete_n: None,
            complete_value: summary(complete, mean),
        },
        CompositionRow {
            metric: "median input tokens (original)".into(),
            full_n: None,
            full_value: summary(full, median),
            complete_n: None,
            complete_value: summary(complete, median),
        },
    ];
    let mut category = |metric: String, pred: &dyn Fn(&Stimulus) -> bool| {
        let nf = full.iter().filter(|s| pred(s)).count();
        let nc = complete.iter().filter(|s| pred(s)).count();
        rows.push(CompositionRow {
            metric,
            full_n: Some(nf),
            full_value: rate(nf, full.len()),
            complete_n: Some(nc),
            complete_value: rate(nc, complete.len()),
        });
    };
    let mut types: Vec<&str> = full.iter().map(|s| s.task_type.as_str()).collect();
    types.sort_unstable();
    types.dedup();
    for t in types {
        category(format!("task type {t}"), &|s| s.task_type == t);
    }
    for t in Tercile::ALL {
        category(format!("length tercile {t}"), &|s| s.tercile == t);
    }
    let mut sources: Vec<_> = full.iter().map(|s| s.source).collect();
    sources.sort_unstable();
    sources.dedup();
    for src in sources {
        category(format!("source {src}"), &|s| s.source == src);
    }
    rows
}
