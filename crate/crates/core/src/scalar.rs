//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All kernels, measures, solvers and optimisers are written against [`Real`].
//! It is implemented for `f32`, `f64` and the 384-bit [`F384`](crate::F384);
//! the last one is what makes badly conditioned Gram systems (equispaced
//! points with a smooth kernel) computable at all.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{FromPrimitive, Num, NumAssignOps, NumCast, ToPrimitive};

/// Floating point scalar used throughout the crate.
///
/// The transcendental functions are trait methods rather than a
/// `num_traits::Float` bound so that multi-word types only need to provide
/// what the library actually evaluates.
pub trait Real:
    Num
    + NumCast
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + Neg<Output = Self>
    + Copy
    + PartialOrd
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Short identifier recorded in provenance fields.
    const NAME: &'static str;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// Error function.
    fn erf(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn is_finite(self) -> bool;
    fn pi() -> Self;
    /// Unit roundoff (distance from 1 to the next representable value).
    fn epsilon() -> Self;

    /// Converts an `f64` literal. Every implementor represents all finite
    /// `f64` values (`f32` rounds).
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits the scalar type")
    }

    /// Nearest `f64`, used for reporting and serialisation.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn pi() -> Self {
        std::f64::consts::PI
    }
    #[inline]
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f32::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f32::ln(self)
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f32::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f32::powi(self, n)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    #[inline]
    fn pi() -> Self {
        std::f32::consts::PI
    }
    #[inline]
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hypot<T: Real>(a: T, b: T) -> T {
        (a * a + b * b).sqrt()
    }

    #[test]
    fn generic_code_runs_on_both_native_widths() {
        assert_eq!(hypot(3.0f64, 4.0), 5.0);
        assert_eq!(hypot(3.0f32, 4.0), 5.0);
        assert_eq!(<f64 as Real>::lit(0.5).max(0.25), 0.5);
        assert_eq!(<f32 as Real>::from_count(7), 7.0);
    }

    #[test]
    fn erf_matches_reference() {
        // erf(0.5) = 0.5204998778130465...
        assert!((Real::erf(0.5f64) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((Real::erf(0.5f32) - 0.520_499_9).abs() < 1e-6);
    }
}
