//! Scalar abstraction shared by all numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the geometry, similarity and solver code is generic over.
///
/// Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Values outside the target range saturate.
    fn lit(x: f64) -> Self;

    /// Converts a count.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = theta % two_pi;
    if a > T::PI() {
        a -= two_pi;
    } else if a <= -T::PI() {
        a += two_pi;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_range_is_half_open_at_minus_pi() {
        let pi = std::f64::consts::PI;
        assert_eq!(normalize_angle(-pi), pi);
        assert_eq!(normalize_angle(pi), pi);
        assert!((normalize_angle(3.0 * pi / 2.0) + pi / 2.0).abs() < 1e-15);
        assert!((normalize_angle(-5.0 * pi / 2.0) + pi / 2.0).abs() < 1e-15);
        assert_eq!(normalize_angle(0.25f32), 0.25f32);
        for k in -50..50 {
            let a = normalize_angle(k as f64 * 0.37);
            assert!(a > -pi && a <= pi);
        }
    }
}
