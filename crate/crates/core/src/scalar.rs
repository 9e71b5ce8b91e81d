//! Scalar abstraction over the floating-point type used by the solvers.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Real scalar the whole crate is generic over (`f32` or `f64`).
///
/// Everything downstream needs field arithmetic, elementary functions and
/// conversion from literals, which `RealField + FromPrimitive` provides.
pub trait Scalar: RealField + Copy + FromPrimitive {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive {}

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}
