//! Numeric types used for rates and costs.
//!
//! Placement algorithms are generic over [`Scalar`] so the same code runs on
//! plain `f64` and on [`Exact`] rationals, which the golden tests rely on.
//! Infinite costs saturate: adding anything to an infinite cost stays
//! infinite and nothing ever wraps.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub trait Scalar:
    Copy
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Sum
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn infinity() -> Self;
    fn is_infinite(self) -> bool;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// True when `delta` is a strict decrease of a cost whose magnitude is
    /// around `scale`. Exact scalars compare with zero; floats require the
    /// decrease to clear a relative `1e-12` band so ties never cycle.
    fn is_improvement(delta: Self, scale: Self) -> bool;

    fn from_int(x: i64) -> Self {
        Self::from_f64(x as f64)
    }

    fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Total order used for tie-breaking; costs are never NaN.
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("cost values are never NaN")
    }
}

pub const FLOAT_IMPROVEMENT_TOL: f64 = 1e-12;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }

    fn infinity() -> Self {
        f64::INFINITY
    }

    fn is_infinite(self) -> bool {
        f64::is_infinite(self)
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn is_improvement(delta: Self, scale: Self) -> bool {
        delta < -FLOAT_IMPROVEMENT_TOL * scale.abs().max(1.0)
    }
}

/// Exact rational number extended with `+∞`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exact {
    Finite(Ratio<i128>),
    Infinite,
}

impl Exact {
    pub fn new(numer: i128, denom: i128) -> Self {
        Exact::Finite(Ratio::new(numer, denom))
    }

    pub fn int(x: i128) -> Self {
        Exact::Finite(Ratio::from_integer(x))
    }

    pub fn ratio(self) -> Option<Ratio<i128>> {
        match self {
            Exact::Finite(r) => Some(r),
            Exact::Infinite => None,
        }
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exact::Finite(r) => write!(f, "{r}"),
            Exact::Infinite => write!(f, "inf"),
        }
    }
}

impl PartialOrd for Exact {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exact {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Exact::Finite(a), Exact::Finite(b)) => a.cmp(b),
            (Exact::Finite(_), Exact::Infinite) => Ordering::Less,
            (Exact::Infinite, Exact::Finite(_)) => Ordering::Greater,
            (Exact::Infinite, Exact::Infinite) => Ordering::Equal,
        }
    }
}

impl Add for Exact {
    type Output = Exact;

    fn add(self, rhs: Exact) -> Exact {
        match (self, rhs) {
            (Exact::Finite(a), Exact::Finite(b)) => Exact::Finite(a + b),
            _ => Exact::Infinite,
        }
    }
}

impl Sub for Exact {
    type Output = Exact;

    fn sub(self, rhs: Exact) -> Exact {
        match (self, rhs) {
            (Exact::Finite(a), Exact::Finite(b)) => Exact::Finite(a - b),
            (Exact::Infinite, Exact::Finite(_)) => Exact::Infinite,
            (_, Exact::Infinite) => panic!("cannot subtract an infinite cost"),
        }
    }
}

impl Neg for Exact {
    type Output = Exact;

    fn neg(self) -> Exact {
        match self {
            Exact::Finite(a) => Exact::Finite(-a),
            Exact::Infinite => panic!("negative infinity is not representable"),
        }
    }
}

impl Mul for Exact {
    type Output = Exact;

    fn mul(self, rhs: Exact) -> Exact {
        match (self, rhs) {
            (Exact::Finite(a), Exact::Finite(b)) => Exact::Finite(a * b),
            (Exact::Finite(a), Exact::Infinite) | (Exact::Infinite, Exact::Finite(a)) => {
                match a.cmp(&Ratio::zero()) {
                    Ordering::Equal => Exact::Finite(Ratio::zero()),
                    Ordering::Greater => Exact::Infinite,
                    Ordering::Less => panic!("negative infinity is not representable"),
                }
            }
            (Exact::Infinite, Exact::Infinite) => Exact::Infinite,
        }
    }
}

impl Sum for Exact {
    fn sum<I: Iterator<Item = Exact>>(iter: I) -> Exact {
        iter.fold(Exact::zero(), |acc, x| acc + x)
    }
}

impl Scalar for Exact {
    fn zero() -> Self {
        Exact::Finite(Ratio::zero())
    }

    fn infinity() -> Self {
        Exact::Infinite
    }

    fn is_infinite(self) -> bool {
        matches!(self, Exact::Infinite)
    }

    fn from_f64(x: f64) -> Self {
        if x.is_infinite() && x > 0.0 {
            return Exact::Infinite;
        }
        Ratio::<i128>::approximate_float(x)
            .map(Exact::Finite)
            .unwrap_or_else(|| panic!("{x} has no rational approximation"))
    }

    fn from_int(x: i64) -> Self {
        Exact::int(x as i128)
    }

    fn to_f64(self) -> f64 {
        match self {
            Exact::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
            Exact::Infinite => f64::INFINITY,
        }
    }

    fn is_improvement(delta: Self, _scale: Self) -> bool {
        delta < Exact::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_saturates_on_infinity() {
        let x = Exact::new(4, 9);
        assert_eq!(x + Exact::Infinite, Exact::Infinite);
        assert_eq!(Exact::Infinite - x, Exact::Infinite);
        assert_eq!(Exact::Infinite * Exact::zero(), Exact::zero());
        assert!(x < Exact::Infinite);
        assert_eq!(Exact::new(8, 9), x + x);
    }

    #[test]
    #[should_panic]
    fn exact_rejects_infinite_subtrahend() {
        let _ = Exact::int(1) - Exact::Infinite;
    }

    #[test]
    fn float_improvement_band() {
        assert!(!f64::is_improvement(-1e-14, 1.0));
        assert!(f64::is_improvement(-1e-9, 1.0));
        assert!(!f64::is_improvement(-1e-9, 1e6));
        assert!(Exact::is_improvement(Exact::new(-1, 1_000_000_000), Exact::int(1)));
    }
}
