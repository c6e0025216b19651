use std::time::Duration;

use rand::Rng;

/// Exponential backoff with additive jitter.
///
/// Retry `n` (1-based) waits `base * factor^(n-1)` plus a random extra of up
/// to `jitter` times that amount, so the wait never drops below the
/// exponential schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: u32,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            base_delay: Duration::from_secs(1),
            factor: 2,
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    pub fn scheduled_delay(&self, retry: u32) -> Duration {
        let exp = self.factor.saturating_pow(retry.saturating_sub(1));
        self.base_delay.saturating_mul(exp)
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let base = self.scheduled_delay(retry);
        let extra = if self.jitter > 0.0 {
            rand::thread_rng().gen_range(0.0..=self.jitter)
        } else {
            0.0
        };
        base + base.mul_f64(extra)
    }

    pub fn total_attempts(&self) -> u32 {
        self.max_retries + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_doubles_from_one_second() {
        let p = RetryPolicy::default();
        let secs: Vec<u64> = (1..=4).map(|n| p.scheduled_delay(n).as_secs()).collect();
        assert_eq!(secs, vec![1, 2, 4, 8]);
        assert_eq!(p.total_attempts(), 5);
    }

    #[test]
    fn jitter_stays_within_bounds() {
        let p = RetryPolicy::default();
        for n in 1..=4 {
            for _ in 0..50 {
                let d = p.delay(n);
                let base = p.scheduled_delay(n);
                assert!(d >= base && d <= base.mul_f64(1.25));
            }
        }
    }
}
