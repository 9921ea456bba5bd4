use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::ExclusionTally;
use crate::design::AllocationTable;
use crate::harness::{latest_by_stimulus, TrialRecord};
use crate::{Arm, Error, Result};

/// Deployment view over every assigned trial: failed calls count at what
/// they were billed (zero when never billed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub arm: Arm,
    pub assigned: usize,
    pub successful: usize,
    pub mean_cost: f64,
    /// `None` only when the arm has successes but no billed cost.
    pub successes_per_dollar: Option<f64>,
    /// `1 - mean_cost / control mean_cost`; `None` for control or a free control.
    pub cost_reduction: Option<f64>,
}

pub fn assignment_sensitivity(alloc: &AllocationTable, log: &[TrialRecord]) -> Result<Vec<SensitivityRow>> {
    let latest = latest_by_stimulus(log);
    let by_id: HashMap<&str, &TrialRecord> = latest.iter().map(|r| (r.stimulus_id.as_str(), r)).collect();
    let mut cells: BTreeMap<Arm, (usize, usize, f64)> = BTreeMap::new();
    for row in alloc.rows() {
        let cell = cells.entry(row.arm).or_default();
        cell.0 += 1;
        if let Some(r) = by_id.get(row.stimulus_id.as_str()) {
            if r.arm != row.arm {
                return Err(Error::Inconsistent(format!(
                    "{} logged under {} but allocated to {}",
                    r.stimulus_id, r.arm, row.arm
                )));
            }
            cell.1 += r.is_success() as usize;
            cell.2 += r.cost.total_f64();
        }
    }
    let mean_cost = |&(assigned, _, total): &(usize, usize, f64)| total / assigned as f64;
    let control = cells.get(&Arm::Control).map(mean_cost);
    Ok(cells
        .iter()
        .map(|(&arm, cell)| {
            let m = mean_cost(cell);
            let successes_per_dollar = match (cell.1, cell.2) {
                (0, _) => Some(0.0),
                (_, t) if t > 0.0 => Some(cell.1 as f64 / t),
                _ => None,
            };
            SensitivityRow {
                arm,
                assigned: cell.0,
                successful: cell.1,
                mean_cost: m,
                successes_per_dollar,
                cost_reduction: match control {
                    Some(c) if arm != Arm::Control && c > 0.0 => Some(1.0 - m / c),
                    _ => None,
                },
            }
        })
        .collect())
}

/// Participant-flow counts from enrollment to analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsortFlow {
    pub assessed: usize,
    pub excluded_too_short: usize,
    pub excluded_bad_status: usize,
    pub excluded_test_fixture: usize,
    pub after_exclusions: usize,
    pub duplicates_removed: usize,
    pub randomized: usize,
    pub allocated: BTreeMap<Arm, usize>,
    pub submitted: BTreeMap<Arm, usize>,
    pub failed: BTreeMap<Arm, usize>,
    pub analyzed: BTreeMap<Arm, usize>,
    pub analyzed_total: usize,
}

impl ConsortFlow {
    /// Checks that every level adds up.
    pub fn check_closure(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Inconsistent(format!("flow does not close: {what}")));
        let excluded = self.excluded_too_short + self.excluded_bad_status + self.excluded_test_fixture;
        if self.assessed != excluded + self.after_exclusions {
            return fail("assessed != excluded + after exclusions");
        }
        if self.after_exclusions != self.duplicates_removed + self.randomized {
            return fail("after exclusions != duplicates + randomized");
        }
        if self.allocated.values().sum::<usize>() != self.randomized {
            return fail("allocated arms do not sum to randomized");
        }
        for (arm, &n) in &self.allocated {
            let sub = self.submitted.get(arm).copied().unwrap_or(0);
            let failed = self.failed.get(arm).copied().unwrap_or(0);
            let analyzed = self.analyzed.get(arm).copied().unwrap_or(0);
            if sub > n || sub != failed + analyzed {
                return fail(&format!("arm {arm}: submitted != failed + analyzed"));
            }
        }
        if self.analyzed.values().sum::<usize>() != self.analyzed_total {
            return fail("analyzed arms do not sum to the analyzed total");
        }
        Ok(())
    }
}

pub fn consort_counts(tally: &ExclusionTally, alloc: &AllocationTable, log: &[TrialRecord]) -> Result<ConsortFlow> {
    let latest = latest_by_stimulus(log);
    let by_id: HashMap<&str, &TrialRecord> = latest.iter().map(|r| (r.stimulus_id.as_str(), r)).collect();
    let mut flow = ConsortFlow {
        assessed: tally.total(),
        excluded_too_short: tally.too_short,
        excluded_bad_status: tally.bad_status,
        excluded_test_fixture: tally.test_fixture,
        after_exclusions: tally.total() - tally.excluded_by_criteria(),
        duplicates_removed: tally.duplicates,
        randomized: alloc.len(),
        ..Default::default()
    };
    for arm in Arm::ALL {
        for m in [
            &mut flow.allocated,
            &mut flow.submitted,
            &mut flow.failed,
            &mut flow.analyzed,
        ] {
            m.insert(arm, 0);
        }
    }
    for row in alloc.rows() {
        *flow.allocated.get_mut(&row.arm).expect("arm") += 1;
        if let Some(r) = by_id.get(row.stimulus_id.as_str()) {
            *flow.submitted.get_mut(&row.arm).expect("arm") += 1;
            let target = if r.is_success() {
                &mut flow.analyzed
            } else {
                &mut flow.failed
            };
            *target.get_mut(&row.arm).expect("arm") += 1;
        }
    }
    flow.analyzed_total = flow.analyzed.values().sum();
    if alloc.len() != tally.retained && !alloc.is_empty() {
        return Err(Error::Inconsistent(format!(
            "allocation has {} rows but the corpus retained {}",
            alloc.len(),
            tally.retained
        )));
    }
    flow.check_closure()?;
    Ok(flow)
}
