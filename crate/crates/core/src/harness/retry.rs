use std::time::Duration;

use chrono::{DateTime, Utc};

use super::backend::BackendError;
use super::clock::Clock;

/// Fixed backoff schedule; one retry per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub backoff: Vec<Duration>,
}

impl RetryPolicy {
    pub fn from_seconds(seconds: &[u64]) -> Self {
        RetryPolicy {
            backoff: seconds.iter().map(|&s| Duration::from_secs(s)).collect(),
        }
    }

    pub fn max_attempts(&self) -> usize {
        self.backoff.len() + 1
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self::from_seconds(&[5, 15, 60])
    }
}

#[derive(Debug)]
pub struct RetryOutcome<T> {
    pub result: Result<T, BackendError>,
    pub attempt_timestamps: Vec<DateTime<Utc>>,
    pub slept: Vec<Duration>,
}

/// Calls `call` until it succeeds or the schedule is exhausted, sleeping the
/// scheduled backoff between failures. `call` receives the 1-based attempt.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    mut call: impl FnMut(usize) -> Result<T, BackendError>,
) -> RetryOutcome<T> {
    let mut attempt_timestamps = Vec::new();
    let mut slept = Vec::new();
    let mut attempt = 1;
    loop {
        attempt_timestamps.push(clock.now());
        match call(attempt) {
            Ok(v) => {
                return RetryOutcome {
                    result: Ok(v),
                    attempt_timestamps,
                    slept,
                }
            }
            Err(e) => match policy.backoff.get(attempt - 1) {
                Some(&wait) => {
                    clock.sleep(wait);
                    slept.push(wait);
                    attempt += 1;
                }
                None => {
                    return RetryOutcome {
                        result: Err(e),
                        attempt_timestamps,
                        slept,
                    }
                }
            },
        }
    }
}
