//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the numeric core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Softmax of `logits` into `out`, subtracting the row max first.
pub fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

/// Arithmetic mean, accumulated relative to the first element so a constant
/// sequence returns that constant exactly.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    let Some(&x0) = xs.first() else {
        return T::nan();
    };
    x0 + xs.iter().map(|&x| x - x0).sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Population standard deviation (divides by `n`).
pub fn population_std<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len());
    var.sqrt()
}
