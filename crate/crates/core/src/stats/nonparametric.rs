use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dist::chi2_sf;
use super::{mean, require_groups, Df, Sample, TestReport};
use crate::{Error, Result};

/// Largest number of label arrangements enumerated exactly by
/// [`permutation_test`]; above this a Monte Carlo estimate is used.
pub const EXACT_PERMUTATION_LIMIT: u64 = 20_000;

/// Midranks (1-based) of `values`, plus the tie-correction sum of `t^3 - t`.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H with midranks and tie correction; chi-square p on k - 1 df.
pub fn kruskal_wallis(groups: &[Sample]) -> Result<TestReport> {
    require_groups("kruskal_wallis", groups, 2, 1)?;
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values().iter().copied()).collect();
    let n = all.len() as f64;
    let df = (groups.len() - 1) as f64;
    let (ranks, ties) = midranks(&all);
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestReport::new("kruskal_wallis", 0.0, Some(Df::One(df)), 1.0)
            .with_note("all observations identical; H = 0, p = 1"));
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    let epsilon_sq = h / (n - 1.0);
    Ok(TestReport::new("kruskal_wallis", h, Some(Df::One(df)), chi2_sf(h, df))
        .with_effect("epsilon_squared", epsilon_sq))
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Two-sample permutation test on the difference of means, two-sided.
///
/// Enumerates every split when there are at most
/// [`EXACT_PERMUTATION_LIMIT`] of them (p is then the exact fraction of splits
/// at least as extreme). Otherwise draws `n_perm` seeded shuffles and reports
/// the add-one estimate `(1 + hits) / (n_perm + 1)`.
pub fn permutation_test(a: &Sample, b: &Sample, n_perm: usize, seed: u64) -> Result<TestReport> {
    permutation_test_with_limit(a, b, n_perm, seed, EXACT_PERMUTATION_LIMIT)
}

/// [`permutation_test`] with an explicit enumeration limit; a limit of 0
/// always takes the Monte Carlo path.
pub fn permutation_test_with_limit(
    a: &Sample,
    b: &Sample,
    n_perm: usize,
    seed: u64,
    exact_limit: u64,
) -> Result<TestReport> {
    let pooled: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
    let (na, n) = (a.len(), pooled.len());
    let total: f64 = pooled.iter().sum();
    let diff_for = |sum_a: f64| sum_a / na as f64 - (total - sum_a) / (n - na) as f64;
    let observed = a.mean() - b.mean();
    // tolerance so that arrangements equal to the observed split count as extreme
    let threshold = observed.abs() * (1.0 - 1e-12) - 1e-12;

    let arrangements = binomial(n, na);
    if arrangements <= exact_limit {
        let mut hits = 0u64;
        let mut idx: Vec<usize> = (0..na).collect();
        loop {
            let s: f64 = idx.iter().map(|&i| pooled[i]).sum();
            if diff_for(s).abs() >= threshold {
                hits += 1;
            }
            // next combination in lexicographic order
            let mut i = na;
            loop {
                if i == 0 {
                    let p = hits as f64 / arrangements as f64;
                    return Ok(TestReport::new("permutation_mean_difference", observed, None, p)
                        .with_note(format!("exact enumeration over {arrangements} splits")));
                }
                i -= 1;
                if idx[i] != i + n - na {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..na {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    if n_perm == 0 {
        return Err(Error::InvalidParameter(
            "n_perm must be positive for Monte Carlo permutation".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = pooled.clone();
    let mut hits = 0u64;
    for _ in 0..n_perm {
        shuffled.shuffle(&mut rng);
        let s: f64 = shuffled[..na].iter().sum();
        if diff_for(s).abs() >= threshold {
            hits += 1;
        }
    }
    let p = (1 + hits) as f64 / (n_perm + 1) as f64;
    Ok(
        TestReport::new("permutation_mean_difference", observed, None, p).with_note(format!(
            "Monte Carlo with {n_perm} permutations, seed {seed}, add-one estimator"
        )),
    )
}

/// D'Agostino-Pearson K^2 omnibus test of normality from sample skewness and
/// kurtosis; chi-square p on 2 df. Used in place of Shapiro-Wilk.
pub fn normality_check(sample: &Sample) -> Result<TestReport> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::InsufficientData {
            test: "normality_check".into(),
            reason: format!("need at least 8 observations, got {n}"),
        });
    }
    let x = sample.values();
    let m = mean(x);
    let moment = |k: i32| x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n as f64;
    let m2 = moment(2);
    if m2 == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "sample `{}` is constant",
            sample.label()
        )));
    }
    let n = n as f64;
    let g1 = moment(3) / m2.powf(1.5);
    let b2 = moment(4) / (m2 * m2);

    let y = g1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 =
        3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let ya = y / alpha;
    let z_skew = delta * (ya + (ya * ya + 1.0).sqrt()).ln();

    let expected = 3.0 * (n - 1.0) / (n + 1.0);
    let var = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0));
    let xk = (b2 - expected) / var.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let denom = 1.0 + xk * (2.0 / (a - 4.0)).sqrt();
    let z_kurt = ((1.0 - 2.0 / (9.0 * a)) - ((1.0 - 2.0 / a) / denom).cbrt()) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z_skew * z_skew + z_kurt * z_kurt;
    Ok(
        TestReport::new("normality_k2", k2, Some(Df::One(2.0)), chi2_sf(k2, 2.0))
            .with_note("D'Agostino-Pearson omnibus; substitute for Shapiro-Wilk"),
    )
}
