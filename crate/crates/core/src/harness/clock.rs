use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};

/// Time source for the harness. Production uses [`SystemClock`]; tests and
/// desk runs use [`SimClock`], where sleeping advances virtual time instantly.
pub trait Clock: Send + Sync {
    /// Wall-clock time, UTC.
    fn now(&self) -> DateTime<Utc>;
    /// Monotonic time since the clock was created.
    fn monotonic(&self) -> Duration;
    fn sleep(&self, d: Duration);
    /// Accounts for time a simulated call would have taken. Real clocks ignore it.
    fn simulate_elapsed(&self, _d: Duration) {}
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn monotonic(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Virtual clock starting at a fixed instant.
#[derive(Debug)]
pub struct SimClock {
    start: DateTime<Utc>,
    elapsed: Mutex<Duration>,
}

impl SimClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        SimClock {
            start,
            elapsed: Mutex::new(Duration::ZERO),
        }
    }

    pub fn advance(&self, d: Duration) {
        *self.elapsed.lock().expect("clock poisoned") += d;
    }
}

impl Clock for SimClock {
    fn now(&self) -> DateTime<Utc> {
        let e = *self.elapsed.lock().expect("clock poisoned");
        self.start + TimeDelta::from_std(e).unwrap_or(TimeDelta::MAX)
    }

    fn monotonic(&self) -> Duration {
        *self.elapsed.lock().expect("clock poisoned")
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }

    fn simulate_elapsed(&self, d: Duration) {
        self.advance(d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn sim_clock_advances_on_sleep() {
        let start = Utc.with_ymd_and_hms(2026, 1, 15, 9, 0, 0).unwrap();
        let c = SimClock::new(start);
        c.sleep(Duration::from_secs(90));
        assert_eq!(c.monotonic(), Duration::from_secs(90));
        assert_eq!(c.now(), start + TimeDelta::seconds(90));
    }
}
