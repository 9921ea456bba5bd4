//! Statistical tests, effect sizes and resampling procedures.
//!
//! Everything here is self-contained: distribution tails come from
//! [`dist`], random streams from seeded ChaCha generators, so every result is
//! reproducible from its inputs and seed.

pub mod dist;
mod effect;
mod nonparametric;
mod parametric;
mod resample;

pub use effect::{cohens_d, eta_squared, holm_adjust, standardized_mean_difference, trimmed_mean};
pub use nonparametric::{
    kruskal_wallis, normality_check, permutation_test, permutation_test_with_limit, EXACT_PERMUTATION_LIMIT,
};
pub use parametric::{
    chi_square_independence, classic_anova, levene_test, pearson_correlation, welch_anova, welch_t, LeveneCenter,
};
pub use resample::{bootstrap_ci, bootstrap_mean_le_zero_p, BootstrapStatistic};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A labelled set of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    label: String,
    values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::InsufficientData {
                test: label,
                reason: "sample is empty".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample `{label}` has non-finite values"
            )));
        }
        Ok(Sample { label, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Unbiased (n - 1) variance; zero for a single observation.
    pub fn variance(&self) -> f64 {
        variance(&self.values)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Same label, values mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Sample {
        Sample {
            label: self.label.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub df: Option<Df>,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<EffectSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestReport {
    pub(crate) fn new(test_name: &str, statistic: f64, df: Option<Df>, p_value: f64) -> Self {
        TestReport {
            test_name: test_name.to_string(),
            statistic,
            df,
            p_value: p_value.clamp(0.0, 1.0),
            effect_size: None,
            ci: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn with_effect(mut self, name: &str, value: f64) -> Self {
        self.effect_size = Some(EffectSize {
            name: name.to_string(),
            value,
        });
        self
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Degrees of freedom as a pair, with the second entry NaN for single-df tests.
    pub fn df_pair(&self) -> (f64, f64) {
        match self.df {
            Some(Df::One(a)) => (a, f64::NAN),
            Some(Df::Two(a, b)) => (a, b),
            None => (f64::NAN, f64::NAN),
        }
    }
}

pub(crate) fn require_groups(test: &str, groups: &[Sample], min_groups: usize, min_n: usize) -> Result<()> {
    if groups.len() < min_groups {
        return Err(Error::InsufficientData {
            test: test.into(),
            reason: format!("need at least {min_groups} groups, got {}", groups.len()),
        });
    }
    if let Some(g) = groups.iter().find(|g| g.len() < min_n) {
        return Err(Error::InsufficientData {
            test: test.into(),
            reason: format!("group `{}` has {} observations, need {min_n}", g.label(), g.len()),
        });
    }
    Ok(())
}
