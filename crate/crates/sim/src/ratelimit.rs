//! Token-bucket rate limiting shared by everything that talks to a live
//! LLM endpoint, so attacker traffic, proxy refinement, and judging stay
//! within one global budget even when issued from worker threads.

use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Thread-safe token bucket. `acquire` blocks until a token is available.
#[derive(Debug)]
pub struct RateLimiter {
    state: Mutex<Bucket>,
    capacity: f64,
    refill_per_sec: f64,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last_refill: Instant,
}

impl RateLimiter {
    /// A bucket holding at most `capacity` tokens (≥ 1), refilled at
    /// `refill_per_sec` tokens per second.
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        let capacity = f64::from(capacity.max(1));
        RateLimiter {
            state: Mutex::new(Bucket { tokens: capacity, last_refill: Instant::now() }),
            capacity,
            refill_per_sec: refill_per_sec.max(f64::MIN_POSITIVE),
        }
    }

    /// Take one token, sleeping until one is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut bucket = self.state.lock().expect("rate limiter poisoned");
                self.refill(&mut bucket);
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - bucket.tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait);
        }
    }

    /// Take one token only if one is available right now.
    pub fn try_acquire(&self) -> bool {
        let mut bucket = self.state.lock().expect("rate limiter poisoned");
        self.refill(&mut bucket);
        if bucket.tokens >= 1.0 {
            bucket.tokens -= 1.0;
            true
        } else {
            false
        }
    }

    fn refill(&self, bucket: &mut Bucket) {
        let now = Instant::now();
        let elapsed = now.duration_since(bucket.last_refill).as_secs_f64();
        bucket.tokens = (bucket.tokens + elapsed * self.refill_per_sec).min(self.capacity);
        bucket.last_refill = now;
    }
}
