//! Tiny helpers for the planar vectors used throughout the crate.
//!
//! Positions, velocities and accelerations are all `[f64; 2]`; these free
//! functions keep the call sites short without pulling in a linear-algebra
//! dependency.

#[cfg(not(feature = "std"))]
use crate::math::FloatExt;

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm_sq(a: [f64; 2]) -> f64 {
    dot(a, a)
}

#[inline]
pub(crate) fn norm(a: [f64; 2]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn scale(a: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] * s, a[1] * s]
}
