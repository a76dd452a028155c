use std::time::Duration;

use rand::Rng;

/// Exponential backoff with jitter. A request is attempted at most
/// `1 + max_retries` times.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn max_attempts(&self) -> u32 {
        1 + self.max_retries
    }

    /// Delay before retry number `retry` (0-based): the capped exponential
    /// step scaled by a uniform factor in [0.5, 1.0].
    pub fn delay(&self, retry: u32) -> Duration {
        let step = self
            .base_delay
            .saturating_mul(2u32.saturating_pow(retry.min(16)))
            .min(self.max_delay);
        let factor = rand::thread_rng().gen_range(0.5..=1.0);
        step.mul_f64(factor)
    }
}
