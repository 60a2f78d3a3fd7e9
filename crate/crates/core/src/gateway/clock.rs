use std::time::{Duration, Instant};

/// Source of timestamps for latency measurement.
pub trait Clock {
    fn now(&self) -> Duration;
    /// Moves a virtual clock forward to `t`. Real clocks ignore it.
    fn advance_to(&mut self, t: Duration);
}

#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Duration,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(now: Duration) -> Self {
        VirtualClock { now }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        self.now
    }

    fn advance_to(&mut self, t: Duration) {
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn advance_to(&mut self, _t: Duration) {}
}
