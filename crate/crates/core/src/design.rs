//! Stratified permuted-block randomization and the balance gate.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Stimulus, Tercile};
use crate::digest::{sha256_hex, sha256_parts};
use crate::stats::{
    chi_square_independence, classic_anova, kruskal_wallis, standardized_mean_difference, Sample, TestReport,
};
use crate::{Arm, Error, Result};

pub const BLOCK_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub task_type: String,
    pub tercile: Tercile,
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.task_type, self.tercile)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub key: StratumKey,
    pub members: Vec<String>,
}

/// Groups stimuli by (task type, tercile). Strata appear in order of first
/// member; members keep corpus order.
pub fn build_strata(corpus: &[Stimulus]) -> Vec<Stratum> {
    let mut index: HashMap<StratumKey, usize> = HashMap::new();
    let mut strata: Vec<Stratum> = Vec::new();
    for s in corpus {
        let key = StratumKey {
            task_type: s.task_type.clone(),
            tercile: s.tercile,
        };
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            strata.push(Stratum {
                key,
                members: Vec::new(),
            });
            strata.len() - 1
        });
        strata[slot].members.push(s.stimulus_id.clone());
    }
    strata
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub stimulus_id: String,
    pub arm: Arm,
    pub task_type: String,
    pub tercile: Tercile,
    pub block_index: usize,
    pub seed: u64,
}

/// Stimulus-to-arm assignments, sorted by stimulus id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationTable {
    rows: Vec<AllocationRow>,
}

impl AllocationTable {
    /// Builds a table from arbitrary rows; rejects duplicate stimulus ids.
    pub fn from_rows(mut rows: Vec<AllocationRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.stimulus_id.cmp(&b.stimulus_id));
        if let Some(w) = rows.windows(2).find(|w| w[0].stimulus_id == w[1].stimulus_id) {
            return Err(Error::Inconsistent(format!(
                "stimulus {} allocated twice",
                w[0].stimulus_id
            )));
        }
        Ok(AllocationTable { rows })
    }

    pub fn rows(&self) -> &[AllocationRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Seed recorded in the rows (all rows share it for generated tables).
    pub fn seed(&self) -> Option<u64> {
        self.rows.first().map(|r| r.seed)
    }

    pub fn arm_of(&self, stimulus_id: &str) -> Option<Arm> {
        self.rows
            .binary_search_by(|r| r.stimulus_id.as_str().cmp(stimulus_id))
            .ok()
            .map(|i| self.rows[i].arm)
    }

    pub fn arm_counts(&self) -> BTreeMap<Arm, usize> {
        let mut counts: BTreeMap<Arm, usize> = Arm::ALL.iter().map(|&a| (a, 0)).collect();
        for r in &self.rows {
            *counts.entry(r.arm).or_default() += 1;
        }
        counts
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<AllocationRow>, _>>()?;
        Self::from_rows(rows)
    }

    /// Lowercase hex SHA-256 of the canonical CSV.
    pub fn digest(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_csv()?))
    }
}

fn stratum_rng(seed: u64, key: &StratumKey) -> ChaCha8Rng {
    let digest = sha256_parts(&[
        &seed.to_le_bytes(),
        key.task_type.as_bytes(),
        &[0x1f],
        key.tercile.name().as_bytes(),
    ]);
    ChaCha8Rng::from_seed(digest)
}

/// Assigns each stratum's members, in order, through successive shuffled
/// blocks of the six arms. A trailing partial block takes a prefix of a fresh
/// shuffle. Each stratum draws from its own stream keyed by (seed, key).
pub fn permuted_block_randomize(strata: &[Stratum], seed: u64) -> Result<AllocationTable> {
    let mut rows = Vec::new();
    for stratum in strata {
        let mut rng = stratum_rng(seed, &stratum.key);
        for (block_index, block) in stratum.members.chunks(BLOCK_SIZE).enumerate() {
            let mut arms = Arm::ALL;
            arms.shuffle(&mut rng);
            for (id, &arm) in block.iter().zip(arms.iter()) {
                rows.push(AllocationRow {
                    stimulus_id: id.clone(),
                    arm,
                    task_type: stratum.key.task_type.clone(),
                    tercile: stratum.key.tercile,
                    block_index,
                    seed,
                });
            }
        }
    }
    AllocationTable::from_rows(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceCriteria {
    pub alpha: f64,
    pub smd_cap: f64,
}

impl Default for BalanceCriteria {
    fn default() -> Self {
        BalanceCriteria {
            alpha: 0.05,
            smd_cap: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdEntry {
    pub covariate: String,
    pub arm_a: Arm,
    pub arm_b: Arm,
    pub smd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub chi2_arm_by_tasktype: TestReport,
    pub anova_length: TestReport,
    pub kw_rework: TestReport,
    pub pairwise_smd: Vec<SmdEntry>,
    pub max_pairwise_smd: f64,
    pub criteria: BalanceCriteria,
    pub passed: bool,
    /// Human-readable names of the checks that failed; empty when passed.
    pub failing: Vec<String>,
}

/// Runs the four balance checks on `alloc` over `corpus`.
pub fn validate_balance(
    corpus: &[Stimulus],
    alloc: &AllocationTable,
    criteria: BalanceCriteria,
) -> Result<BalanceReport> {
    let mut by_arm: BTreeMap<Arm, Vec<&Stimulus>> = Arm::ALL.iter().map(|&a| (a, Vec::new())).collect();
    for s in corpus {
        let arm = alloc
            .arm_of(&s.stimulus_id)
            .ok_or_else(|| Error::Inconsistent(format!("stimulus {} has no allocation", s.stimulus_id)))?;
        by_arm.get_mut(&arm).expect("all arms present").push(s);
    }
    for (arm, members) in &by_arm {
        if members.len() < 2 {
            return Err(Error::InsufficientData {
                test: "balance gate".into(),
                reason: format!("arm {arm} has {} members, every check needs at least 2", members.len()),
            });
        }
    }

    let task_types: Vec<&str> = {
        let mut t: Vec<&str> = corpus.iter().map(|s| s.task_type.as_str()).collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    let table: Vec<Vec<u64>> = by_arm
        .values()
        .map(|members| {
            task_types
                .iter()
                .map(|t| members.iter().filter(|s| s.task_type == *t).count() as u64)
                .collect()
        })
        .collect();
    let chi2 = chi_square_independence(&table)?;

    let covariate = |name: &str, f: &dyn Fn(&Stimulus) -> f64| -> Result<Vec<Sample>> {
        by_arm
            .iter()
            .map(|(arm, members)| Sample::new(format!("{arm}:{name}"), members.iter().map(|s| f(s)).collect()))
            .collect()
    };
    let lengths = covariate("char_length", &|s| s.char_length as f64)?;
    let rework = covariate("rework_count", &|s| s.rework_count as f64)?;
    let anova = classic_anova(&lengths)?;
    let kw = kruskal_wallis(&rework)?;

    let mut pairwise_smd = Vec::new();
    for (name, samples) in [("char_length", &lengths), ("rework_count", &rework)] {
        for i in 0..Arm::ALL.len() {
            for j in i + 1..Arm::ALL.len() {
                pairwise_smd.push(SmdEntry {
                    covariate: name.to_string(),
                    arm_a: Arm::ALL[i],
                    arm_b: Arm::ALL[j],
                    smd: standardized_mean_difference(&samples[i], &samples[j]),
                });
            }
        }
    }
    let max_pairwise_smd = pairwise_smd.iter().map(|e| e.smd).fold(0.0, f64::max);

    let mut failing = Vec::new();
    if chi2.p_value <= criteria.alpha {
        failing.push(format!("chi-square arm x task type (p = {:.4})", chi2.p_value));
    }
    if anova.p_value <= criteria.alpha {
        failing.push(format!("ANOVA char length (p = {:.4})", anova.p_value));
    }
    if kw.p_value <= criteria.alpha {
        failing.push(format!("Kruskal-Wallis rework count (p = {:.4})", kw.p_value));
    }
    if max_pairwise_smd >= criteria.smd_cap {
        failing.push(format!(
            "max pairwise SMD {:.4} >= {}",
            max_pairwise_smd, criteria.smd_cap
        ));
    }
    Ok(BalanceReport {
        chi2_arm_by_tasktype: chi2,
        anova_length: anova,
        kw_rework: kw,
        pairwise_smd,
        max_pairwise_smd,
        criteria,
        passed: failing.is_empty(),
        failing,
    })
}

#[derive(Debug, Clone)]
pub struct Rerandomization {
    pub table: AllocationTable,
    pub report: BalanceReport,
    pub attempts_used: u64,
}

/// Tries seeds `seed0, seed0 + 1, ...` until the balance gate passes.
pub fn rerandomize_until_balanced(
    corpus: &[Stimulus],
    seed0: u64,
    max_attempts: u64,
    criteria: BalanceCriteria,
) -> Result<Rerandomization> {
    if max_attempts == 0 {
        return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
    }
    let strata = build_strata(corpus);
    let mut best: Option<(u64, BalanceReport)> = None;
    for attempt in 0..max_attempts {
        let seed = seed0 + attempt;
        let table = permuted_block_randomize(&strata, seed)?;
        let report = validate_balance(corpus, &table, criteria)?;
        if report.passed {
            return Ok(Rerandomization {
                table,
                report,
                attempts_used: attempt + 1,
            });
        }
        let better = match &best {
            None => true,
            Some((_, b)) => (report.failing.len(), report.max_pairwise_smd) < (b.failing.len(), b.max_pairwise_smd),
        };
        if better {
            best = Some((seed, report));
        }
    }
    let (best_seed, report) = best.expect("at least one attempt");
    Err(Error::NoBalancedAllocation {
        attempts: max_attempts,
        best_seed,
        failing: report.failing,
    })
}
