//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the analytics and the simulator are written against.
///
/// Implemented for `f32` and `f64`. The simulator is only exercised at `f64`
/// precision in the test suite; `f32` is adequate for the closed forms.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative difference `|a - b| / |b|`, falling back to the absolute difference
/// when the reference is zero.
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    let d = (a - b).abs();
    if b == T::zero() {
        d
    } else {
        d / b.abs()
    }
}

/// Parallel combination of two inductances (or resistances).
pub fn parallel<T: Scalar>(a: T, b: T) -> T {
    a * b / (a + b)
}
