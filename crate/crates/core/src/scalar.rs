//! Scalar abstractions.
//!
//! Two families are used. [`Real`] covers IEEE floats and drives every grid,
//! integrator and quadrature kernel. [`FieldScalar`] is looser: it only needs
//! field arithmetic, so the Taylor recurrence can also run in double-double
//! and in exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

/// Floating point scalar for the numerical kernels.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field arithmetic sufficient for the coefficient recurrence.
pub trait FieldScalar: Clone + Num + Signed + PartialOrd + Debug {
    /// Exact `num/den` for rational types, correctly rounded otherwise.
    fn ratio(num: i64, den: i64) -> Self;

    /// Nearest `f64`.
    fn to_f64_approx(&self) -> f64;

    /// Embeds an `f64` value (exactly for every binary float).
    fn from_f64_exact(x: f64) -> Self;

    /// `self / rhs` to the full precision of the type.
    fn quotient(&self, rhs: &Self) -> Self {
        self.clone() / rhs.clone()
    }
}

impl FieldScalar for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64_approx(&self) -> f64 {
        *self
    }

    fn from_f64_exact(x: f64) -> Self {
        x
    }
}

impl FieldScalar for TwoFloat {
    fn ratio(num: i64, den: i64) -> Self {
        TwoFloat::from(num as f64) / den as f64
    }

    fn to_f64_approx(&self) -> f64 {
        f64::from(*self)
    }

    fn from_f64_exact(x: f64) -> Self {
        TwoFloat::from(x)
    }

    // The crate's TwoFloat / TwoFloat drops the low word of the reciprocal
    // residual, so divide by long division using the exact TwoFloat / f64 path.
    fn quotient(&self, rhs: &Self) -> Self {
        let q1 = *self / rhs.hi();
        let r1 = *self - q1 * *rhs;
        let q2 = r1 / rhs.hi();
        let r2 = r1 - q2 * *rhs;
        q1 + q2 + r2 / rhs.hi()
    }
}

impl FieldScalar for BigRational {
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64_approx(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(Zero::zero)
    }
}
