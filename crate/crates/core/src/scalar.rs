//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar the simulator can run on (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Scale factor applied to `f64`-calibrated tolerances.
    fn tolerance_scale() -> Self;
}

impl Real for f64 {
    fn tolerance_scale() -> Self {
        1.0
    }
}

impl Real for f32 {
    fn tolerance_scale() -> Self {
        1.0e4
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Error function, evaluated in double precision.
pub fn erf<T: Real>(x: T) -> T {
    lit(libm::erf(to_f64(x)))
}

/// Central binomial coefficient C(2m, m) as a scalar.
pub fn central_binomial<T: Real>(m: usize) -> T {
    let mut c = 1.0f64;
    for k in 0..m {
        c = c * (2 * m - k) as f64 / (k + 1) as f64;
    }
    lit(c.round())
}

/// n! as a scalar.
pub fn factorial<T: Real>(n: usize) -> T {
    lit((1..=n).fold(1.0f64, |acc, k| acc * k as f64))
}
