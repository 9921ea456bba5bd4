//! Trial execution: compression, rate-limited calls with retries, and a
//! resumable append-only log.

pub mod backend;
pub mod clock;
pub mod http;
pub mod limiter;
pub mod log;
pub mod retry;
pub mod simulated;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use backend::{
    BackendError, CensoredBackend, ErrorKind, InferenceConfig, ModelBackend, ModelRequest, ModelResponse,
    DEFAULT_SYSTEM_PROMPT,
};
pub use clock::{Clock, SimClock, SystemClock};
pub use limiter::{RateGate, TokenBucket};
pub use log::{latest_by_stimulus, parse_log, read_log, Outcome, TrialLog, TrialRecord};
pub use retry::{with_retries, RetryOutcome, RetryPolicy};
pub use simulated::{LatencyModel, SimulatedBackend, SimulatedModelSpec};

use crate::compression::compress;
use crate::corpus::Stimulus;
use crate::cost::{trial_cost, CostBreakdown, TokenUsage};
use crate::design::AllocationTable;
use crate::digest::sha256_hex;
use crate::{Arm, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub stimulus_id: String,
    pub arm: Arm,
}

/// One trial per allocation row, in table order.
pub fn plan_from_allocation(alloc: &AllocationTable) -> Vec<PlannedTrial> {
    alloc
        .rows()
        .iter()
        .map(|r| PlannedTrial {
            stimulus_id: r.stimulus_id.clone(),
            arm: r.arm,
        })
        .collect()
}

/// Re-runs every treatment-arm stimulus through the control condition, to
/// give each treatment response a matched uncompressed baseline.
pub fn control_baseline_plan(alloc: &AllocationTable) -> Vec<PlannedTrial> {
    alloc
        .rows()
        .iter()
        .filter(|r| r.arm != Arm::Control)
        .map(|r| PlannedTrial {
            stimulus_id: r.stimulus_id.clone(),
            arm: Arm::Control,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResumeMode {
    /// Any logged record, success or exhausted failure, counts as done.
    #[default]
    SkipAttempted,
    /// Only successes count as done; failed trials are queued again.
    RetryFailures,
}

/// Trials of `plan` still to run given the records in `log_path`.
pub fn resume_filter(log_path: &Path, plan: &[PlannedTrial], mode: ResumeMode) -> Result<Vec<PlannedTrial>> {
    let records = read_log(log_path)?;
    let done: HashSet<&str> = match mode {
        ResumeMode::SkipAttempted => records.iter().map(|r| r.stimulus_id.as_str()).collect(),
        ResumeMode::RetryFailures => records
            .iter()
            .filter(|r| r.is_success())
            .map(|r| r.stimulus_id.as_str())
            .collect(),
    };
    Ok(plan
        .iter()
        .filter(|p| !done.contains(p.stimulus_id.as_str()))
        .cloned()
        .collect())
}

pub struct RunOptions<'a> {
    pub clock: &'a dyn Clock,
    pub workers: usize,
    pub resume: ResumeMode,
    /// Stop after this many records have been written (crash simulation).
    pub stop_after: Option<usize>,
}

impl<'a> RunOptions<'a> {
    pub fn new(clock: &'a dyn Clock) -> Self {
        RunOptions {
            clock,
            workers: 1,
            resume: ResumeMode::default(),
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub submitted: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Planned trials skipped because the log already had them.
    pub already_logged: usize,
}

/// Compresses, calls and logs one trial. Every attempt waits on the shared gate.
pub fn execute_trial(
    stimulus: &Stimulus,
    arm: Arm,
    backend: &dyn ModelBackend,
    config: &InferenceConfig,
    gate: &RateGate<'_>,
    clock: &dyn Clock,
) -> Result<TrialRecord> {
    let spec = arm.compression_spec();
    let outcome = compress(&stimulus.instruction, &spec)?;
    let policy = RetryPolicy::from_seconds(&config.retry_backoff_seconds);
    let request = ModelRequest {
        system_prompt: &config.system_prompt,
        user_prompt: &outcome.compressed_text,
        stimulus_id: &stimulus.stimulus_id,
        realized_ratio: outcome.realized_ratio,
        config,
    };
    let mut latency = None;
    let attempts = with_retries(&policy, clock, |_| {
        gate.wait();
        let started = clock.monotonic();
        let result = backend.respond(&request);
        if let Ok(resp) = &result {
            latency = Some(match resp.simulated_latency_ms {
                Some(ms) => {
                    clock.simulate_elapsed(Duration::from_millis(ms));
                    ms
                }
                None => (clock.monotonic() - started).as_millis() as u64,
            });
        }
        result
    });
    let base = TrialRecord {
        stimulus_id: stimulus.stimulus_id.clone(),
        arm,
        strategy: spec.strategy,
        target_r: spec.target_r,
        realized_ratio: outcome.realized_ratio,
        compressed_digest: sha256_hex(outcome.compressed_text.as_bytes()),
        input_tokens: None,
        output_tokens: None,
        cost: CostBreakdown::zero(),
        latency_ms: None,
        outcome: Outcome::FailedAfterRetries,
        error_kind: None,
        response_text: None,
        attempt_timestamps: attempts.attempt_timestamps,
    };
    Ok(match attempts.result {
        Ok(resp) => {
            let usage = TokenUsage {
                input_tokens: resp.input_tokens,
                output_tokens: resp.output_tokens,
            };
            TrialRecord {
                input_tokens: Some(resp.input_tokens),
                output_tokens: Some(resp.output_tokens),
                cost: trial_cost(usage, &config.pricing),
                latency_ms: latency,
                outcome: Outcome::Success,
                response_text: Some(resp.text),
                ..base
            }
        }
        Err(e) => TrialRecord {
            error_kind: Some(e.kind),
            ..base
        },
    })
}

/// Runs every pending trial of `plan` and appends one record per trial.
///
/// Trials already in the log are skipped per `opts.resume`. A log write
/// failure stops the run and is returned; backend failures become
/// `failed_after_retries` records and the run continues.
pub fn run_trials(
    plan: &[PlannedTrial],
    corpus: &[Stimulus],
    backend: &dyn ModelBackend,
    config: &InferenceConfig,
    log_path: &Path,
    opts: &RunOptions<'_>,
) -> Result<RunSummary> {
    if config.rpm_limit == 0 {
        return Err(Error::InvalidParameter("rpm_limit must be positive".into()));
    }
    let by_id: HashMap<&str, &Stimulus> = corpus.iter().map(|s| (s.stimulus_id.as_str(), s)).collect();
    if let Some(p) = plan.iter().find(|p| !by_id.contains_key(p.stimulus_id.as_str())) {
        return Err(Error::Inconsistent(format!(
            "allocated stimulus {} is not in the corpus",
            p.stimulus_id
        )));
    }
    let pending = resume_filter(log_path, plan, opts.resume)?;
    let mut log = TrialLog::open(log_path)?;
    let summary = run_pending(&pending, &by_id, backend, config, &mut log, opts)?;
    Ok(RunSummary {
        already_logged: plan.len() - pending.len(),
        ..summary
    })
}

/// Core loop over an explicit pending list and log sink.
pub fn run_pending(
    pending: &[PlannedTrial],
    corpus: &HashMap<&str, &Stimulus>,
    backend: &dyn ModelBackend,
    config: &InferenceConfig,
    log: &mut TrialLog,
    opts: &RunOptions<'_>,
) -> Result<RunSummary> {
    let gate = RateGate::new(TokenBucket::per_minute(config.rpm_limit), opts.clock);
    let next = AtomicUsize::new(0);
    let halt = AtomicBool::new(false);
    let shared = Mutex::new((log, RunSummary::default(), None::<Error>));
    let limit = opts.stop_after.unwrap_or(usize::MAX);

    let worker = || loop {
        if halt.load(Ordering::SeqCst) {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= pending.len() || i >= limit {
            return;
        }
        let trial = &pending[i];
        let stimulus = corpus[trial.stimulus_id.as_str()];
        let result = execute_trial(stimulus, trial.arm, backend, config, &gate, opts.clock);
        let mut guard = shared.lock().expect("log writer poisoned");
        let (log, summary, error) = &mut *guard;
        if error.is_some() {
            return;
        }
        let outcome = result.and_then(|record| log.append(&record).map(|_| record.outcome));
        match outcome {
            Ok(o) => {
                summary.submitted += 1;
                match o {
                    Outcome::Success => summary.succeeded += 1,
                    Outcome::FailedAfterRetries => summary.failed += 1,
                }
            }
            Err(e) => {
                *error = Some(e);
                halt.store(true, Ordering::SeqCst);
                return;
            }
        }
    };

    let workers = opts.workers.max(1);
    if workers == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    let (_, summary, error) = shared.into_inner().expect("log writer poisoned");
    match error {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
