use std::time::Duration;

use tokio::time::Instant;

/// How the live session maps simulated time onto wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One tick per `dt` of wall-clock time.
    Realtime,
    /// As fast as the machine allows.
    Fast,
}

/// Ticks run per wake-up in fast mode.
const FAST_CHUNK: u64 = 500;
/// Falling further behind than this restarts the schedule instead of bursting.
const MAX_CATCH_UP: u64 = 2_000;

impl Pacing {
    pub(crate) fn wake_period(self) -> Duration {
        match self {
            Pacing::Realtime => Duration::from_millis(5),
            Pacing::Fast => Duration::from_millis(1),
        }
    }
}

/// Simulated-time schedule: tick `k` is due `(k − origin_tick)·dt` after
/// `origin`, so rounding never accumulates into drift.
#[derive(Debug)]
pub(crate) struct Clock {
    pacing: Pacing,
    dt: f64,
    origin: Instant,
    origin_tick: u64,
}

impl Clock {
    pub(crate) fn new(pacing: Pacing, dt: f64, tick: u64) -> Self {
        Self {
            pacing,
            dt,
            origin: Instant::now(),
            origin_tick: tick,
        }
    }

    pub(crate) fn rebase(&mut self, tick: u64) {
        self.origin = Instant::now();
        self.origin_tick = tick;
    }

    /// Ticks to run now to be back on schedule.
    pub(crate) fn due(&mut self, tick: u64) -> u64 {
        match self.pacing {
            Pacing::Fast => FAST_CHUNK,
            Pacing::Realtime => {
                let target =
                    self.origin_tick + (self.origin.elapsed().as_secs_f64() / self.dt) as u64;
                let behind = target.saturating_sub(tick);
                if behind > MAX_CATCH_UP {
                    self.rebase(tick);
                    return 1;
                }
                behind
            }
        }
    }
}
