//! Distance scalars.
//!
//! Profinite models carry exact rational distances; net models over the
//! circle and SU(2) carry `f64`. Every metric routine is generic over
//! [`Scalar`] so that one code path serves both, with comparisons exact for
//! rationals and relative-tolerance for floats.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational used for profinite models.
pub type Rational = Ratio<i128>;

/// Relative tolerance used for all floating comparisons.
pub const FLOAT_TOL: f64 = 1e-9;

pub trait Scalar:
    Copy + Debug + PartialOrd + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Zero + 'static
{
    const EXACT: bool;

    fn from_int(n: i64) -> Self;
    fn from_ratio(p: i64, q: i64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;

    /// `self <= other`, up to the float tolerance for inexact scalars.
    fn le_tol(self, other: Self) -> bool;

    fn eq_tol(self, other: Self) -> bool {
        self.le_tol(other) && other.le_tol(self)
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

    /// Smallest integer `k` with `k >= self` (for nonnegative values).
    fn ceil_u64(self) -> u64;

    /// Human-readable form; rationals print as `p/q`.
    fn render(self) -> String;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(p: i64, q: i64) -> Self {
        p as f64 / q as f64
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn le_tol(self, other: Self) -> bool {
        self <= other + FLOAT_TOL * other.abs().max(self.abs()).max(1.0)
    }

    fn ceil_u64(self) -> u64 {
        if self <= 0.0 {
            0
        } else {
            self.ceil() as u64
        }
    }

    fn render(self) -> String {
        format!("{self}")
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        Ratio::from_integer(n as i128)
    }

    fn from_ratio(p: i64, q: i64) -> Self {
        Ratio::new(p as i128, q as i128)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn abs(self) -> Self {
        Signed::abs(&self)
    }

    fn le_tol(self, other: Self) -> bool {
        self <= other
    }

    fn ceil_u64(self) -> u64 {
        if self <= Zero::zero() {
            0
        } else {
            self.ceil().to_integer() as u64
        }
    }

    fn render(self) -> String {
        if *self.denom() == 1 {
            format!("{}", self.numer())
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Exact conversion of a finite `f64` into a rational (every finite double is
/// a dyadic rational). Returns `None` when the value does not fit in `i128`.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(<Rational as Zero>::zero());
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exponent = ((bits >> 52) & 0x7ff) as i32;
    let fraction = (bits & 0x000f_ffff_ffff_ffff) as i128;
    let (mantissa, exp) = if exponent == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1 << 52), exponent - 1075)
    };
    if exp >= 0 {
        if exp > 70 {
            return None;
        }
        Some(Rational::from_integer(sign * (mantissa << exp)))
    } else {
        let shift = -exp;
        if shift > 120 {
            return None;
        }
        Some(Rational::new(sign * mantissa, 1i128 << shift))
    }
}

/// Parse `"p/q"`, `"p"` or a decimal literal into a rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: i128 = p.trim().parse().ok()?;
        let q: i128 = q.trim().parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Ok(n) = text.parse::<i128>() {
        return Some(Rational::from_integer(n));
    }
    rational_from_f64(text.parse().ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_conversion_is_exact() {
        assert_eq!(rational_from_f64(0.375), Some(Rational::new(3, 8)));
        assert_eq!(rational_from_f64(-16.0), Some(Rational::from_integer(-16)));
        assert_eq!(rational_from_f64(f64::NAN), None);
        let third = rational_from_f64(1.0 / 3.0).unwrap();
        assert_eq!(Scalar::to_f64(third), 1.0 / 3.0);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/4"), Some(Rational::new(3, 4)));
        assert_eq!(parse_rational(" 7 "), Some(Rational::from_integer(7)));
        assert_eq!(parse_rational("0.5"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(1e6f64.le_tol(1e6 - 1e-4));
        assert!(!1.0f64.le_tol(1.0 - 1e-6));
        assert!(Rational::new(1, 3).le_tol(Rational::new(1, 3)));
        assert!(!Rational::new(1, 3).le_tol(Rational::new(1, 4)));
    }
}
