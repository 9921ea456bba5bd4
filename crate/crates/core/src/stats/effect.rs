use super::{mean, Sample};
use crate::{Error, Result};

fn pooled_sd(a: &Sample, b: &Sample) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let dof = na + nb - 2.0;
    if dof <= 0.0 {
        return 0.0;
    }
    (((na - 1.0) * a.variance() + (nb - 1.0) * b.variance()) / dof).sqrt()
}

/// Cohen's d: `(mean_a - mean_b) / pooled_sd`.
pub fn cohens_d(a: &Sample, b: &Sample) -> Result<f64> {
    let sd = pooled_sd(a, b);
    if sd == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "pooled standard deviation of `{}` and `{}` is zero",
            a.label(),
            b.label()
        )));
    }
    Ok((a.mean() - b.mean()) / sd)
}

/// Absolute standardized mean difference used by the balance gate.
///
/// Unlike [`cohens_d`] this never fails: equal means give 0 regardless of
/// spread, and distinct means with zero spread give infinity.
pub fn standardized_mean_difference(a: &Sample, b: &Sample) -> f64 {
    let diff = (a.mean() - b.mean()).abs();
    if diff == 0.0 {
        return 0.0;
    }
    let sd = pooled_sd(a, b);
    if sd == 0.0 {
        f64::INFINITY
    } else {
        diff / sd
    }
}

/// `SS_between / SS_total`; 0 when every observation is identical.
pub fn eta_squared(groups: &[Sample]) -> f64 {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values().iter().copied()).collect();
    if all.is_empty() {
        return 0.0;
    }
    let grand = mean(&all);
    let ss_total: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    if ss_total == 0.0 {
        return 0.0;
    }
    let ss_between: f64 = groups.iter().map(|g| g.len() as f64 * (g.mean() - grand).powi(2)).sum();
    (ss_between / ss_total).clamp(0.0, 1.0)
}

/// Holm step-down adjustment; output is in input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let candidate = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

/// Symmetric trimmed mean dropping `floor(trim * n)` values from each tail.
pub fn trimmed_mean(sample: &Sample, trim: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::InvalidParameter(format!("trim {trim} must be in [0, 0.5)")));
    }
    let mut sorted = sample.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = (trim * sorted.len() as f64).floor() as usize;
    Ok(mean(&sorted[cut..sorted.len() - cut]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn cohens_d_cases() {
        assert_eq!(cohens_d(&s(&[1.0, 2.0, 3.0]), &s(&[1.0, 2.0, 3.0])).unwrap(), 0.0);
        // both variances 1, means 1 apart
        let d = cohens_d(&s(&[1.0, 2.0, 3.0]), &s(&[0.0, 1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        assert!(cohens_d(&s(&[1.0, 1.0]), &s(&[2.0, 2.0])).is_err());
    }

    #[test]
    fn smd_cases() {
        assert_eq!(standardized_mean_difference(&s(&[4.0, 4.0]), &s(&[4.0, 4.0])), 0.0);
        let (a, b) = (s(&[1.0, 5.0, 2.0]), s(&[3.0, 3.5, 9.0]));
        assert_eq!(
            standardized_mean_difference(&a, &b),
            standardized_mean_difference(&b, &a)
        );
    }

    #[test]
    fn eta_squared_cases() {
        assert_eq!(eta_squared(&[s(&[1.0, 3.0]), s(&[3.0, 1.0])]), 0.0);
        assert_eq!(eta_squared(&[s(&[1.0, 1.0]), s(&[5.0, 5.0])]), 1.0);
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.2]).unwrap(), vec![0.2]);
        let adj = holm_adjust(&[0.01, 0.04, 0.03]).unwrap();
        for (got, want) in adj.iter().zip([0.03, 0.06, 0.06]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let eq = holm_adjust(&[0.05, 0.05, 0.05]).unwrap();
        assert!(eq.iter().all(|&p| (p - 0.15).abs() < 1e-15));
        assert_eq!(holm_adjust(&[0.5, 0.6]).unwrap(), vec![1.0, 1.0]);
        assert!(holm_adjust(&[1.5]).is_err());
    }

    #[test]
    fn trimmed_mean_examples() {
        assert_eq!(trimmed_mean(&s(&[7.0; 10]), 0.05).unwrap(), 7.0);
        let mut v = vec![0.0];
        v.extend((1..=18).map(f64::from));
        v.push(1000.0);
        assert_abs_diff_eq!(trimmed_mean(&s(&v), 0.05).unwrap(), 9.5, epsilon = 1e-15);
        assert_abs_diff_eq!(trimmed_mean(&s(&v), 0.0).unwrap(), mean(&v), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn holm_monotone_and_dominating(ps in proptest::collection::vec(0.0f64..=1.0, 1..30)) {
            let adj = holm_adjust(&ps).unwrap();
            for (raw, a) in ps.iter().zip(&adj) {
                prop_assert!(a >= raw && *a <= 1.0);
            }
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&i, &j| ps[i].total_cmp(&ps[j]).then(i.cmp(&j)));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
        }

        #[test]
        fn d_and_eta_scale_and_shift_invariant(a in proptest::collection::vec(-50.0f64..50.0, 3..20),
                                               b in proptest::collection::vec(-50.0f64..50.0, 3..20),
                                               shift in -1e3f64..1e3, scale in 0.01f64..100.0) {
            let (sa, sb) = (Sample::new("a", a).unwrap(), Sample::new("b", b).unwrap());
            prop_assume!(pooled_sd(&sa, &sb) > 1e-6);
            let d0 = cohens_d(&sa, &sb).unwrap();
            let d1 = cohens_d(&sa.map(|v| v * scale + shift), &sb.map(|v| v * scale + shift)).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-9 * (1.0 + d0.abs()));
            let e0 = eta_squared(&[sa.clone(), sb.clone()]);
            let e1 = eta_squared(&[sa.map(|v| v * scale + shift), sb.map(|v| v * scale + shift)]);
            prop_assert!((e0 - e1).abs() < 1e-9);
        }
    }
}
