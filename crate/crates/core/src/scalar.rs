//! Scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point scalar: `f32` or `f64`.
///
/// Tolerances throughout the crate are stated for `f64`. For narrower types they
/// are floored at a small multiple of the type's machine epsilon, see [`tol`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal.
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Tolerance `t` (stated for `f64`), floored at `256 ε` of `T`.
#[inline]
pub fn tol<T: Real>(t: f64) -> T {
    T::of(t).max(T::epsilon() * T::of(256.0))
}

/// Wraps an angle into `(-π, π]`. Angles already in range are returned bit-for-bit.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let pi = T::PI();
    if x > -pi && x <= pi {
        return x;
    }
    let two_pi = T::two() * pi;
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -pi {
        y += two_pi;
    } else if y > pi {
        y -= two_pi;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_is_identity_in_range() {
        for &x in &[0.0, 1.0, -1.0, PI, -PI + 1e-15, 3.0] {
            assert_eq!(wrap_angle(x), x);
        }
    }

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
        let w = wrap_angle(1e6_f64);
        assert!(w > -PI && w <= PI);
    }

    #[test]
    fn tol_floor_for_f32() {
        assert_eq!(tol::<f64>(1e-12), 1e-12);
        assert!(tol::<f32>(1e-12) > 1e-6);
    }
}
