//! Timestamps on the two clocks an invocation touches.
//!
//! The platform and the client each keep their own clock. The two instant
//! types below cannot be subtracted from each other, so a duration is always
//! computed on a single clock.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Microseconds since the platform clock's epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlatformInstant(pub i64);

/// Microseconds on the client's local clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientInstant(pub i64);

macro_rules! instant_ops {
    ($ty:ident) => {
        impl $ty {
            pub const fn from_micros(us: i64) -> Self {
                $ty(us)
            }

            pub fn from_secs_f64(secs: f64) -> Self {
                $ty((secs * 1e6).round() as i64)
            }

            pub const fn micros(self) -> i64 {
                self.0
            }

            pub fn as_secs_f64(self) -> f64 {
                self.0 as f64 / 1e6
            }

            /// Shift by a signed number of microseconds.
            pub const fn offset_by(self, us: i64) -> Self {
                $ty(self.0 + us)
            }
        }

        impl Sub for $ty {
            type Output = i64;

            fn sub(self, rhs: $ty) -> i64 {
                self.0 - rhs.0
            }
        }

        impl Add<i64> for $ty {
            type Output = $ty;

            fn add(self, rhs: i64) -> $ty {
                $ty(self.0 + rhs)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}us", self.0)
            }
        }
    };
}

instant_ops!(PlatformInstant);
instant_ops!(ClientInstant);

/// Converts a span in microseconds into milliseconds.
pub fn us_to_ms(us: i64) -> f64 {
    us as f64 / 1000.0
}

/// Converts milliseconds into whole microseconds, rounding up so that no
/// positive duration collapses to zero.
pub fn ms_to_us_ceil(ms: f64) -> i64 {
    if ms <= 0.0 {
        0
    } else {
        (ms * 1000.0).ceil() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_clock_subtraction() {
        let a = PlatformInstant::from_micros(1_500);
        let b = PlatformInstant::from_micros(500);
        assert_eq!(a - b, 1_000);
        assert_eq!(b + 250, PlatformInstant(750));
    }

    #[test]
    fn ceil_conversion_keeps_small_spans() {
        assert_eq!(ms_to_us_ceil(0.0001), 1);
        assert_eq!(ms_to_us_ceil(1.0), 1000);
        assert_eq!(ms_to_us_ceil(-3.0), 0);
        assert_eq!(ClientInstant::from_secs_f64(1.25).micros(), 1_250_000);
    }
}
