//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the library (`f32` and `f64` both qualify).
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64`, used for diagnostics and error payloads.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `2π` in the working scalar.
#[inline]
pub fn two_pi<T: Scalar>() -> T {
    T::two_pi()
}
