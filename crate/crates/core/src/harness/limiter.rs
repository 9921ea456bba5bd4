use std::sync::Mutex;
use std::time::Duration;

use super::clock::Clock;

/// Token bucket: `capacity` permits, refilled continuously at `refill_per_sec`.
/// Starts full.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    tokens: f64,
    last: Duration,
}

impl TokenBucket {
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        TokenBucket {
            capacity: capacity as f64,
            refill_per_sec,
            tokens: capacity as f64,
            last: Duration::ZERO,
        }
    }

    /// Bucket sized for `rpm` requests per minute: capacity `rpm`, refill `rpm / 60` per second.
    pub fn per_minute(rpm: u32) -> Self {
        Self::new(rpm, rpm as f64 / 60.0)
    }

    pub fn empty(mut self) -> Self {
        self.tokens = 0.0;
        self
    }

    fn refill(&mut self, now: Duration) {
        if now > self.last {
            let dt = (now - self.last).as_secs_f64();
            self.tokens = (self.tokens + dt * self.refill_per_sec).min(self.capacity);
            self.last = now;
        }
    }

    /// Tokens available at `now`, without consuming.
    pub fn available(&mut self, now: Duration) -> f64 {
        self.refill(now);
        self.tokens
    }

    /// Reserves one permit and returns the instant at which it may be used.
    /// Reservations queue: each waiting caller is scheduled after the previous one.
    pub fn acquire(&mut self, now: Duration) -> Duration {
        self.refill(now);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            return now.max(self.last);
        }
        let wait = (1.0 - self.tokens) / self.refill_per_sec;
        let at = self.last + Duration::from_secs_f64(wait);
        self.tokens = 0.0;
        self.last = at;
        at
    }
}

/// Thread-safe gate around a [`TokenBucket`]; callers sleep on the shared clock.
pub struct RateGate<'c> {
    bucket: Mutex<TokenBucket>,
    clock: &'c dyn Clock,
}

impl<'c> RateGate<'c> {
    pub fn new(bucket: TokenBucket, clock: &'c dyn Clock) -> Self {
        RateGate {
            bucket: Mutex::new(bucket),
            clock,
        }
    }

    /// Blocks until a permit is available; returns the permit time.
    pub fn wait(&self) -> Duration {
        let now = self.clock.monotonic();
        let at = self.bucket.lock().expect("rate gate poisoned").acquire(now);
        if at > now {
            self.clock.sleep(at - now);
        }
        at
    }
}
