//! Numeric abstraction used by the metric code.
//!
//! Precision/recall/F1 are ratios of counts, so the aggregation code is written
//! once over [`Scalar`] and instantiated with `f64` for reporting, `f32` where
//! memory matters, and [`Exact`] when a result has to be compared bit-for-bit
//! against a rational reference.

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};
use std::fmt::Debug;

/// Exact rational scalar.
pub type Exact = Ratio<i64>;

pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lossless (for the counts seen in practice) conversion from a count.
    fn from_count(n: u64) -> Self;

    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Exact {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trips_counts() {
        let third = Exact::from_count(1) / Exact::from_count(3);
        assert_eq!(third * Exact::from_count(3), Exact::from_count(1));
        assert!((Scalar::to_f64(third) - 1.0 / 3.0).abs() < 1e-15);
    }
}
