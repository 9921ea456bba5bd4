//! Harness behaviour under crashes and mid-run credit exhaustion.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rct_core::corpus::{prepare, InclusionCriteria, Stimulus, Tercile};
use rct_core::design::{rerandomize_until_balanced, BalanceCriteria};
use rct_core::harness::simulated::{SimulatedBackend, SimulatedModelSpec};
use rct_core::harness::{
    plan_from_allocation, read_log, run_trials, CensoredBackend, InferenceConfig, RunOptions, SimClock,
};
use rct_core::synth::{length_biased_order, reference_raw_corpus, CENSORED_SUCCESSES, CENSORED_TERCILE_SUCCESSES};
use rct_core::Arm;

fn reference_corpus() -> Vec<Stimulus> {
    let (p, a) = reference_raw_corpus(1577);
    prepare(p.into_iter().chain(a).collect(), &InclusionCriteria::default())
        .unwrap()
        .stimuli
}

fn clock() -> SimClock {
    SimClock::new(Utc.with_ymd_and_hms(2026, 1, 15, 9, 0, 0).unwrap())
}

#[test]
fn credit_exhaustion_at_request_359() {
    let corpus = reference_corpus();
    let alloc = rerandomize_until_balanced(&corpus, 0, 200, BalanceCriteria::default())
        .unwrap()
        .table;
    let plan = length_biased_order(&alloc, CENSORED_TERCILE_SUCCESSES, 7);
    assert_eq!(plan.len(), 1199);

    let backend = CensoredBackend::new(
        SimulatedBackend::new(SimulatedModelSpec::default()).unwrap(),
        CENSORED_SUCCESSES,
    );
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("trials.jsonl");
    let clock = clock();
    let summary = run_trials(
        &plan,
        &corpus,
        &backend,
        &InferenceConfig::default(),
        &log_path,
        &RunOptions::new(&clock),
    )
    .unwrap();
    assert_eq!(summary.succeeded, 358);
    assert_eq!(summary.failed, 841);

    let log = read_log(&log_path).unwrap();
    // The first 358 requests are exactly the successes.
    assert!(log[..358].iter().all(|r| r.is_success()));
    assert!(log[358..].iter().all(|r| !r.is_success()));

    let allocated = alloc.arm_counts();
    let mut failed: BTreeMap<Arm, usize> = BTreeMap::new();
    for r in log.iter().filter(|r| !r.is_success()) {
        *failed.entry(r.arm).or_default() += 1;
    }
    let mean = 841.0 / 6.0;
    for arm in Arm::ALL {
        let f = failed[&arm] as f64;
        assert!(
            (f - mean).abs() <= 5.0,
            "{arm}: {f} failures (allocated {})",
            allocated[&arm]
        );
    }

    let tercile_of: BTreeMap<&str, Tercile> = corpus.iter().map(|s| (s.stimulus_id.as_str(), s.tercile)).collect();
    let mut by_tercile: BTreeMap<Tercile, (usize, usize)> = BTreeMap::new();
    for r in &log {
        let cell = by_tercile.entry(tercile_of[r.stimulus_id.as_str()]).or_default();
        cell.0 += r.is_success() as usize;
        cell.1 += 1;
    }
    let rates: Vec<f64> = by_tercile.values().map(|&(s, n)| 100.0 * s as f64 / n as f64).collect();
    for (got, want) in rates.iter().zip([69.3, 18.7, 1.5]) {
        assert!((got - want).abs() < 3.0, "tercile rates {rates:?}");
    }
}

fn small_setup() -> (Vec<Stimulus>, Vec<rct_core::harness::PlannedTrial>) {
    let corpus: Vec<Stimulus> = reference_corpus().into_iter().take(200).collect();
    let alloc = rct_core::design::permuted_block_randomize(&rct_core::design::build_strata(&corpus), 3).unwrap();
    let plan = plan_from_allocation(&alloc);
    (corpus, plan)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn crash_and_resume_never_duplicates_or_loses(stops in prop::collection::vec(1usize..80, 1..4), torn in any::<bool>()) {
        let (corpus, plan) = small_setup();
        let backend = SimulatedBackend::new(SimulatedModelSpec { noise_sigma: 0.0, ..Default::default() }).unwrap();
        let config = InferenceConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("trials.jsonl");
        let clock = clock();
        for stop in stops {
            let mut opts = RunOptions::new(&clock);
            opts.stop_after = Some(stop);
            run_trials(&plan, &corpus, &backend, &config, &log_path, &opts).unwrap();
            if torn {
                // A write cut off mid-line.
                let mut f = std::fs::OpenOptions::new().append(true).open(&log_path).unwrap();
                f.write_all(b"{\"stimulus_id\":\"half").unwrap();
            }
        }
        run_trials(&plan, &corpus, &backend, &config, &log_path, &RunOptions::new(&clock)).unwrap();
        let log = read_log(&log_path).unwrap();
        let ids: Vec<&str> = log.iter().map(|r| r.stimulus_id.as_str()).collect();
        let unique: HashSet<&str> = ids.iter().copied().collect();
        prop_assert_eq!(ids.len(), unique.len());
        let planned: HashSet<&str> = plan.iter().map(|p| p.stimulus_id.as_str()).collect();
        prop_assert_eq!(unique, planned);
    }
}
