//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the numeric core is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
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
    /// Converts an `f64` literal; lossy for `f32`.
    fn lit(v: f64) -> Self;

    /// Converts from a count.
    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;

    /// Tolerance appropriate for probability-row normalization checks.
    fn norm_tol() -> Self;
}

impl Real for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    fn norm_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn norm_tol() -> Self {
        1e-5
    }
}

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub fn argmax<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place<F: Real>(values: &mut [F]) {
    let max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        let u = F::one() / F::of_usize(values.len());
        values.iter_mut().for_each(|v| *v = u);
        return;
    }
    let mut total = F::zero();
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    for v in values.iter_mut() {
        *v = *v / total;
    }
}
