use super::dist::{chi2_sf, f_sf, t_two_sided_p};
use super::effect::eta_squared;
use super::{median, require_groups, Df, Sample, TestReport};
use crate::{Error, Result};

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t(a: &Sample, b: &Sample) -> Result<TestReport> {
    require_groups("welch_t", &[a.clone(), b.clone()], 2, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (a.variance() / na, b.variance() / nb);
    let diff = a.mean() - b.mean();
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TestReport::new("welch_t", 0.0, None, 1.0)
                .with_note("both samples constant and equal; t = 0, p = 1 by convention")
        } else {
            TestReport::new("welch_t", diff.signum() * f64::INFINITY, None, 0.0)
                .with_note("both samples constant with different means; infinite separation")
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestReport::new("welch_t", t, Some(Df::One(df)), t_two_sided_p(t, df)))
}

/// Welch's heteroscedastic one-way ANOVA, with eta-squared attached.
pub fn welch_anova(groups: &[Sample]) -> Result<TestReport> {
    require_groups("welch_anova", groups, 2, 2)?;
    if let Some(g) = groups.iter().find(|g| g.variance() == 0.0) {
        return Err(Error::InsufficientData {
            test: "welch_anova".into(),
            reason: format!("group `{}` has zero variance", g.label()),
        });
    }
    let k = groups.len() as f64;
    let weights: Vec<f64> = groups.iter().map(|g| g.len() as f64 / g.variance()).collect();
    let total_weight: f64 = weights.iter().sum();
    let weighted_mean = groups.iter().zip(&weights).map(|(g, w)| w * g.mean()).sum::<f64>() / total_weight;
    let between = groups
        .iter()
        .zip(&weights)
        .map(|(g, w)| w * (g.mean() - weighted_mean).powi(2))
        .sum::<f64>()
        / (k - 1.0);
    let lambda: f64 = groups
        .iter()
        .zip(&weights)
        .map(|(g, w)| (1.0 - w / total_weight).powi(2) / (g.len() as f64 - 1.0))
        .sum();
    let denom = 1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda;
    let f = between / denom;
    let df2 = (k * k - 1.0) / (3.0 * lambda);
    Ok(
        TestReport::new("welch_anova", f, Some(Df::Two(k - 1.0, df2)), f_sf(f, k - 1.0, df2))
            .with_effect("eta_squared", eta_squared(groups)),
    )
}

/// Classic one-way ANOVA (pooled within-group variance).
pub fn classic_anova(groups: &[Sample]) -> Result<TestReport> {
    require_groups("classic_anova", groups, 2, 1)?;
    let k = groups.len();
    let n: usize = groups.iter().map(Sample::len).sum();
    if n <= k {
        return Err(Error::InsufficientData {
            test: "classic_anova".into(),
            reason: "no within-group degrees of freedom".into(),
        });
    }
    let grand = groups.iter().flat_map(|g| g.values()).sum::<f64>() / n as f64;
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (g.mean() - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = g.mean();
            g.values().iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    let (df1, df2) = ((k - 1) as f64, (n - k) as f64);
    let eta = eta_squared(groups);
    if ssw == 0.0 {
        let report = if ssb == 0.0 {
            TestReport::new("classic_anova", 0.0, Some(Df::Two(df1, df2)), 1.0).with_note("all observations identical")
        } else {
            TestReport::new("classic_anova", f64::INFINITY, Some(Df::Two(df1, df2)), 0.0)
                .with_note("zero within-group variance with distinct means")
        };
        return Ok(report.with_effect("eta_squared", eta));
    }
    let f = (ssb / df1) / (ssw / df2);
    Ok(TestReport::new("classic_anova", f, Some(Df::Two(df1, df2)), f_sf(f, df1, df2)).with_effect("eta_squared", eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeveneCenter {
    /// Brown-Forsythe variant.
    Median,
    Mean,
}

/// Levene's test: one-way ANOVA on absolute deviations from each group's center.
pub fn levene_test(groups: &[Sample], center: LeveneCenter) -> Result<TestReport> {
    require_groups("levene", groups, 2, 2)?;
    let deviations: Vec<Sample> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Median => median(g.values()),
                LeveneCenter::Mean => g.mean(),
            };
            g.map(|v| (v - c).abs())
        })
        .collect();
    let mut report = classic_anova(&deviations)?;
    report.test_name = match center {
        LeveneCenter::Median => "levene_median".into(),
        LeveneCenter::Mean => "levene_mean".into(),
    };
    report.effect_size = None;
    Ok(report)
}

/// Pearson chi-square test of independence on an R x C count table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<TestReport> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidParameter(
            "contingency table must be a non-empty rectangle".into(),
        ));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(Error::InsufficientData {
            test: "chi_square".into(),
            reason: format!("row {i} has a zero marginal"),
        });
    }
    if let Some(j) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(Error::InsufficientData {
            test: "chi_square".into(),
            reason: format!("column {j} has a zero marginal"),
        });
    }
    let total: f64 = row_sums.iter().sum();
    if rows == 1 || cols == 1 {
        return Ok(TestReport::new("chi_square", 0.0, Some(Df::One(0.0)), 1.0)
            .with_note("single row or column; independence holds trivially"));
    }
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            stat += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as f64;
    let cramers_v = (stat / (total * (rows.min(cols) - 1) as f64)).sqrt();
    Ok(TestReport::new("chi_square", stat, Some(Df::One(df)), chi2_sf(stat, df)).with_effect("cramers_v", cramers_v))
}

/// Pearson correlation with a two-sided t-transform p-value on n - 2 df.
pub fn pearson_correlation(x: &Sample, y: &Sample) -> Result<TestReport> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(
            "correlation needs paired samples of equal length".into(),
        ));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            test: "pearson".into(),
            reason: "need at least 3 pairs".into(),
        });
    }
    let (mx, my) = (x.mean(), y.mean());
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.values().iter().zip(y.values()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation undefined for a constant variable".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, df)
    };
    Ok(TestReport::new("pearson", r, Some(Df::One(df)), p).with_effect("r", r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::dist::t_cdf;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(label: &str, v: &[f64]) -> Sample {
        Sample::new(label, v.to_vec()).unwrap()
    }

    #[test]
    fn welch_t_identical_samples() {
        let r = welch_t(&s("a", &[1.0, 2.0, 3.0]), &s("b", &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn welch_t_hand_example() {
        let r = welch_t(&s("a", &[1.0, 2.0, 3.0]), &s("b", &[4.0, 5.0, 6.0])).unwrap();
        assert_abs_diff_eq!(r.statistic, -3.674_234_614_174_767, epsilon = 1e-12);
        assert_abs_diff_eq!(r.df_pair().0, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.0213, epsilon = 1e-4);
    }

    #[test]
    fn welch_t_constant_samples() {
        let same = welch_t(&s("a", &[2.0, 2.0]), &s("b", &[2.0, 2.0])).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        let apart = welch_t(&s("a", &[1.0, 1.0]), &s("b", &[3.0, 3.0])).unwrap();
        assert_eq!(apart.p_value, 0.0);
        assert!(apart.statistic.is_infinite());
    }

    #[test]
    fn welch_anova_identical_groups() {
        let g = [
            s("a", &[1.0, 2.0, 4.0]),
            s("b", &[1.0, 2.0, 4.0]),
            s("c", &[1.0, 2.0, 4.0]),
        ];
        let r = welch_anova(&g).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_anova_rejects_zero_variance() {
        let err = welch_anova(&[s("flat", &[1.0, 1.0]), s("b", &[1.0, 2.0])]).unwrap_err();
        assert!(err.to_string().contains("flat"));
    }

    #[test]
    fn classic_anova_hand_fixture() {
        // groups {1,2,3} {4,5,6} {7,8,9}: grand mean 5, SSB = 3*(16+0+16) = 54 ... per group n=3:
        // SSB = 3*((2-5)^2 + 0 + (8-5)^2) = 54, SSW = 3 * 2 = 6, F = (54/2)/(6/6) = 27
        let g = [
            s("a", &[1.0, 2.0, 3.0]),
            s("b", &[4.0, 5.0, 6.0]),
            s("c", &[7.0, 8.0, 9.0]),
        ];
        let r = classic_anova(&g).unwrap();
        assert_abs_diff_eq!(r.statistic, 27.0, epsilon = 1e-12);
        assert_eq!(r.df, Some(Df::Two(2.0, 6.0)));
        assert_abs_diff_eq!(r.effect_size.unwrap().value, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn classic_anova_identical_groups() {
        let r = classic_anova(&[s("a", &[3.0, 5.0]), s("b", &[3.0, 5.0])]).unwrap();
        assert_eq!(r.statistic, 0.0);
        let flat = classic_anova(&[s("a", &[3.0, 3.0]), s("b", &[3.0, 3.0])]).unwrap();
        assert_eq!(flat.p_value, 1.0);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_independence(&[vec![10, 20], vec![20, 10]]).unwrap();
        assert_abs_diff_eq!(r.statistic, 20.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.df, Some(Df::One(1.0)));
        assert_abs_diff_eq!(r.p_value, 0.0098, epsilon = 1e-4);
        let prop = chi_square_independence(&[vec![10, 20], vec![20, 40]]).unwrap();
        assert_abs_diff_eq!(prop.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prop.p_value, 1.0, epsilon = 1e-12);
        assert!(chi_square_independence(&[vec![0, 0], vec![1, 2]]).is_err());
    }

    #[test]
    fn pearson_extremes() {
        let x = s("x", &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = pearson_correlation(&x, &x).unwrap();
        assert_eq!(r.statistic, 1.0);
        let neg = pearson_correlation(&x, &x.map(|v| -v)).unwrap();
        assert_eq!(neg.statistic, -1.0);
        assert!(pearson_correlation(&x, &s("c", &[2.0; 5])).is_err());
    }

    #[test]
    fn levene_detects_scale_difference() {
        let base: Vec<f64> = (0..50)
            .map(|i| crate::stats::dist::normal_quantile((i as f64 + 0.5) / 50.0))
            .collect();
        let a = Sample::new("a", base.clone()).unwrap();
        let b = Sample::new("b", base.iter().map(|v| v * 10.0).collect()).unwrap();
        let r = levene_test(&[a.clone(), b], LeveneCenter::Median).unwrap();
        assert!(r.p_value < 0.01);
        let same = levene_test(&[a.clone(), a], LeveneCenter::Median).unwrap();
        assert_eq!(same.statistic, 0.0);
    }

    #[test]
    fn two_group_anova_is_pooled_t_squared() {
        let a = s("a", &[1.0, 4.0, 2.5, 7.0]);
        let b = s("b", &[3.0, 8.0, 9.5, 6.0, 5.0]);
        let f = classic_anova(&[a.clone(), b.clone()]).unwrap().statistic;
        let (na, nb) = (4.0, 5.0);
        let sp2 = ((na - 1.0) * a.variance() + (nb - 1.0) * b.variance()) / (na + nb - 2.0);
        let t = (a.mean() - b.mean()) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
        assert_abs_diff_eq!(f, t * t, epsilon = 1e-10);
        // p-values agree too
        let p_t = 2.0 * (1.0 - t_cdf(t.abs(), na + nb - 2.0));
        assert_abs_diff_eq!(classic_anova(&[a, b]).unwrap().p_value, p_t, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn anova_f_equals_t_squared(a in proptest::collection::vec(-100.0f64..100.0, 2..20),
                                    b in proptest::collection::vec(-100.0f64..100.0, 2..20)) {
            let (sa, sb) = (Sample::new("a", a).unwrap(), Sample::new("b", b).unwrap());
            let (na, nb) = (sa.len() as f64, sb.len() as f64);
            let sp2 = ((na - 1.0) * sa.variance() + (nb - 1.0) * sb.variance()) / (na + nb - 2.0);
            prop_assume!(sp2 > 1e-9);
            let t = (sa.mean() - sb.mean()) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
            let f = classic_anova(&[sa, sb]).unwrap().statistic;
            prop_assert!((f - t * t).abs() <= 1e-8 * (1.0 + f.abs()));
        }

        #[test]
        fn shift_and_scale_invariance(a in proptest::collection::vec(-50.0f64..50.0, 3..15),
                                      b in proptest::collection::vec(-50.0f64..50.0, 3..15),
                                      shift in -1e3f64..1e3, scale in 0.1f64..10.0) {
            let (sa, sb) = (Sample::new("a", a).unwrap(), Sample::new("b", b).unwrap());
            prop_assume!(sa.variance() > 1e-6 && sb.variance() > 1e-6);
            let t0 = welch_t(&sa, &sb).unwrap();
            let t1 = welch_t(&sa.map(|v| v + shift), &sb.map(|v| v + shift)).unwrap();
            prop_assert!((t0.statistic - t1.statistic).abs() < 1e-10 * (1.0 + t0.statistic.abs()) * 1e3);
            prop_assert!((t0.p_value - t1.p_value).abs() < 1e-8);
            let w0 = welch_anova(&[sa.clone(), sb.clone()]).unwrap();
            let w1 = welch_anova(&[sa.map(|v| v * scale), sb.map(|v| v * scale)]).unwrap();
            prop_assert!((w0.statistic - w1.statistic).abs() < 1e-8 * (1.0 + w0.statistic));
            prop_assert!((w0.effect_size.as_ref().unwrap().value - w1.effect_size.as_ref().unwrap().value).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&w0.p_value));
        }
    }
}
