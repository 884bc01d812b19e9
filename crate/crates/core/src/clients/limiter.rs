//! Clocks and a requests-per-second limiter.

use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// A clock that only moves when someone sleeps on it.
#[derive(Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("clock lock") += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock lock")
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Spaces request starts at least `1 / rate` seconds apart.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Duration>,
}

impl RateLimiter {
    /// `rate` in requests per second; zero or negative disables limiting.
    pub fn new(rate: f64) -> RateLimiter {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next: Mutex::new(Duration::ZERO),
        }
    }

    /// Block until a request may start; returns the granted start time.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        let mut next = self.next.lock().expect("limiter lock");
        let now = clock.now();
        if now < *next {
            clock.sleep(*next - now);
        }
        let start = clock.now().max(*next);
        *next = start + self.interval;
        start
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn max_in_window(starts: &[Duration], window: Duration) -> usize {
        let mut sorted = starts.to_vec();
        sorted.sort();
        (0..sorted.len())
            .map(|i| sorted[i..].iter().take_while(|&&t| t < sorted[i] + window).count())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn never_exceeds_rate() {
        let clock = VirtualClock::default();
        let limiter = RateLimiter::new(4.0);
        let starts: Vec<Duration> = (0..40).map(|_| limiter.acquire(&clock)).collect();
        assert!(max_in_window(&starts, Duration::from_secs(1)) <= 4);
        assert_eq!(starts[4], Duration::from_secs(1));
    }

    #[test]
    fn concurrent_callers_respect_rate() {
        let clock = Arc::new(VirtualClock::default());
        let limiter = Arc::new(RateLimiter::new(5.0));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let (c, l) = (clock.clone(), limiter.clone());
                std::thread::spawn(move || (0..10).map(|_| l.acquire(c.as_ref())).collect::<Vec<_>>())
            })
            .collect();
        let starts: Vec<Duration> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        assert_eq!(starts.len(), 40);
        assert!(max_in_window(&starts, Duration::from_secs(1)) <= 5);
    }

    #[test]
    fn idle_time_is_not_banked() {
        let clock = VirtualClock::default();
        let limiter = RateLimiter::new(2.0);
        limiter.acquire(&clock);
        clock.advance(Duration::from_secs(10));
        let a = limiter.acquire(&clock);
        let b = limiter.acquire(&clock);
        assert_eq!(b - a, Duration::from_millis(500));
    }
}
