use std::collections::VecDeque;
use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

/// Sliding-window limiter: at most `limit` admissions in any `window`.
///
/// Uses the tokio clock, so tests can drive it with paused time.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    admitted: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(limit: u32) -> RateLimiter {
        RateLimiter::new(limit, Duration::from_secs(60))
    }

    pub fn new(limit: u32, window: Duration) -> RateLimiter {
        assert!(limit > 0, "rate limit must be positive");
        RateLimiter {
            limit: limit as usize,
            window,
            admitted: Mutex::new(VecDeque::new()),
        }
    }

    /// Waits until a call may proceed and records its admission.
    pub async fn acquire(&self) {
        loop {
            let wait_until = {
                let mut admitted = self.admitted.lock().await;
                let now = Instant::now();
                while admitted
                    .front()
                    .is_some_and(|t| now.duration_since(*t) >= self.window)
                {
                    admitted.pop_front();
                }
                if admitted.len() < self.limit {
                    admitted.push_back(now);
                    return;
                }
                admitted[0] + self.window
            };
            tokio::time::sleep_until(wait_until).await;
        }
    }
}
