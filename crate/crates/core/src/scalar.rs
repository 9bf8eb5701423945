//! Scalar abstraction shared by every geometric and numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point coordinate type used throughout the crate.
///
/// Implemented for `f32` and `f64`. Exact predicates (the ROI hull) lift
/// values into [`BigRational`] through [`Scalar::to_exact`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Display + Debug + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into this scalar.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Exact rational value of this (finite) float.
    fn to_exact(self) -> BigRational {
        BigRational::from_float(self.as_f64()).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
