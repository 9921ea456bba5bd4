use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantile_sorted, ConfidenceInterval, Sample};
use crate::{Error, Result};

/// Statistic resampled by [`bootstrap_ci`]. Two-sample statistics resample
/// each arm independently.
#[derive(Debug, Clone)]
pub enum BootstrapStatistic {
    Mean(Sample),
    /// mean(a) - mean(b)
    MeanDifference(Sample, Sample),
    /// mean(numerator) / mean(denominator)
    RatioOfMeans(Sample, Sample),
}

impl BootstrapStatistic {
    fn samples(&self) -> Vec<&Sample> {
        match self {
            BootstrapStatistic::Mean(a) => vec![a],
            BootstrapStatistic::MeanDifference(a, b) | BootstrapStatistic::RatioOfMeans(a, b) => vec![a, b],
        }
    }

    fn combine(&self, means: &[f64]) -> f64 {
        match self {
            BootstrapStatistic::Mean(_) => means[0],
            BootstrapStatistic::MeanDifference(..) => means[0] - means[1],
            BootstrapStatistic::RatioOfMeans(..) => means[0] / means[1],
        }
    }

    /// Statistic on the original data.
    pub fn point_estimate(&self) -> f64 {
        let means: Vec<f64> = self.samples().iter().map(|s| s.mean()).collect();
        self.combine(&means)
    }

    fn method(&self) -> &'static str {
        match self {
            BootstrapStatistic::Mean(_) => "percentile bootstrap of the mean",
            BootstrapStatistic::MeanDifference(..) => "percentile bootstrap of the mean difference",
            BootstrapStatistic::RatioOfMeans(..) => "percentile bootstrap of the ratio of means",
        }
    }
}

fn resampled_mean(values: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = values.len();
    (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
}

fn replicates(stat: &BootstrapStatistic, resamples: usize, seed: u64) -> Vec<f64> {
    let samples = stat.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = vec![0.0; samples.len()];
    let mut out = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for (m, s) in means.iter_mut().zip(&samples) {
            *m = resampled_mean(s.values(), &mut rng);
        }
        out.push(stat.combine(&means));
    }
    out
}

/// Percentile bootstrap interval over `resamples` seeded resamples.
pub fn bootstrap_ci(stat: &BootstrapStatistic, resamples: usize, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    if resamples == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {level} must be in (0, 1)"
        )));
    }
    if let Some(s) = stat.samples().into_iter().find(|s| s.len() < 2) {
        return Err(Error::InsufficientData {
            test: "bootstrap_ci".into(),
            reason: format!("sample `{}` has fewer than 2 observations", s.label()),
        });
    }
    if let BootstrapStatistic::RatioOfMeans(_, d) = stat {
        if d.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(
                "ratio-of-means denominator must be strictly positive".into(),
            ));
        }
    }
    let mut reps = replicates(stat, resamples, seed);
    reps.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        low: quantile_sorted(&reps, tail),
        high: quantile_sorted(&reps, 1.0 - tail),
        level,
        method: stat.method().to_string(),
    })
}

/// One-sided bootstrap p-value for `H0: mean <= 0` against `mean > 0`:
/// `(1 + #{resampled mean <= 0}) / (resamples + 1)`.
pub fn bootstrap_mean_le_zero_p(sample: &Sample, resamples: usize, seed: u64) -> Result<f64> {
    if resamples == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    if sample.len() < 2 {
        return Err(Error::InsufficientData {
            test: "bootstrap_mean_le_zero".into(),
            reason: "need at least 2 observations".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..resamples)
        .filter(|_| resampled_mean(sample.values(), &mut rng) <= 0.0)
        .count();
    Ok((1 + hits) as f64 / (resamples + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::dist::normal_quantile;
    use proptest::prelude::*;

    fn s(v: Vec<f64>) -> Sample {
        Sample::new("s", v).unwrap()
    }

    #[test]
    fn constant_sample_zero_width() {
        let ci = bootstrap_ci(&BootstrapStatistic::Mean(s(vec![4.0; 10])), 500, 0.95, 1).unwrap();
        assert_eq!((ci.low, ci.high), (4.0, 4.0));
    }

    #[test]
    fn mean_ci_near_normal_theory() {
        let sample = s((1..=100).map(f64::from).collect());
        let ci = bootstrap_ci(&BootstrapStatistic::Mean(sample.clone()), 10_000, 0.95, 42).unwrap();
        assert!(ci.low < 50.5 && 50.5 < ci.high);
        let half = normal_quantile(0.975) * sample.sd() / 10.0;
        assert!((ci.low - (50.5 - half)).abs() < 1.5, "{ci:?}");
        assert!((ci.high - (50.5 + half)).abs() < 1.5, "{ci:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let st = BootstrapStatistic::MeanDifference(s(vec![1.0, 5.0, 3.0]), s(vec![2.0, 2.5, 9.0]));
        assert_eq!(
            bootstrap_ci(&st, 300, 0.9, 7).unwrap(),
            bootstrap_ci(&st, 300, 0.9, 7).unwrap()
        );
        assert_ne!(
            bootstrap_ci(&st, 300, 0.9, 7).unwrap(),
            bootstrap_ci(&st, 300, 0.9, 8).unwrap()
        );
    }

    #[test]
    fn one_sided_p() {
        let pos = s((1..=30).map(f64::from).collect());
        assert!(bootstrap_mean_le_zero_p(&pos, 1000, 1).unwrap() < 0.01);
        let neg = pos.map(|v| -v);
        assert!(bootstrap_mean_le_zero_p(&neg, 1000, 1).unwrap() > 0.99);
    }

    #[test]
    fn rejects_bad_ratio_denominator() {
        let st = BootstrapStatistic::RatioOfMeans(s(vec![1.0, 2.0]), s(vec![0.0, 1.0]));
        assert!(bootstrap_ci(&st, 10, 0.95, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ci_contains_mean(v in proptest::collection::vec(-100.0f64..100.0, 2..40), seed in 0u64..1000) {
            let st = BootstrapStatistic::Mean(s(v));
            let ci = bootstrap_ci(&st, 400, 0.95, seed).unwrap();
            prop_assert!(ci.low <= ci.high);
            let m = st.point_estimate();
            prop_assert!(ci.low <= m + 1e-9 && m - 1e-9 <= ci.high);
        }
    }
}
