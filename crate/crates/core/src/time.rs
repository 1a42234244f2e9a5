//! UTC timestamps with microsecond resolution.

use core::fmt;
use core::ops::{Add, Sub};
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::math::{ceil, round};

/// Microseconds since the Unix epoch, UTC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const EPOCH: Timestamp = Timestamp(0);

    pub const fn from_micros(us: i64) -> Self {
        Timestamp(us)
    }

    pub const fn from_secs(s: i64) -> Self {
        Timestamp(s * 1_000_000)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    /// Signed offset in microseconds.
    pub const fn offset(self, us: i64) -> Self {
        Timestamp(self.0 + us)
    }

    /// Seconds elapsed since `earlier` (negative if `earlier` is later).
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 * 1e-6
    }

    /// Time of sample `i` in a series starting at `self` with the given rate.
    pub fn sample_time(self, i: usize, rate_hz: f64) -> Timestamp {
        Timestamp(self.0 + round(i as f64 * 1e6 / rate_hz) as i64)
    }

    /// Index of the first sample at or after `t` for a series starting at `self`.
    /// May be negative when `t` precedes the start.
    pub fn index_at_or_after(self, t: Timestamp, rate_hz: f64) -> i64 {
        let pos = (t.0 - self.0) as f64 * rate_hz * 1e-6;
        ceil(pos - 1e-7) as i64
    }

    /// Index of the sample nearest to `t`, if `t` lies within half a sample period of it.
    pub fn nearest_index(self, t: Timestamp, rate_hz: f64) -> i64 {
        let pos = (t.0 - self.0) as f64 * rate_hz * 1e-6;
        round(pos) as i64
    }
}

pub(crate) fn micros(d: Duration) -> i64 {
    d.as_micros() as i64
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 + micros(rhs))
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 - micros(rhs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}
