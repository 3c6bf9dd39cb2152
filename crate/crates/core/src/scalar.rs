//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the data, losses and optimizer are generic over.
///
/// Implemented for `f32` and `f64`. Reference tolerances in the test suites
/// assume `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, which is always representable (possibly rounded).
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `log(1 + exp(t))` without overflow for large `|t|`.
    fn softplus(self) -> Self {
        let zero = Self::zero();
        self.max(zero) + (-self.abs()).exp().ln_1p()
    }

    /// Logistic function `1 / (1 + exp(-t))`.
    fn sigmoid(self) -> Self {
        let one = Self::one();
        if self >= Self::zero() {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }
}

impl Scalar for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Squared Euclidean norm with a left-to-right summation order.
pub fn norm_sq<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Dense inner product, left-to-right.
pub fn dense_inner<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Text form used by the table and trace files.
///
/// Plain decimal notation for moderate magnitudes, exponent notation
/// otherwise; both are the shortest representation that parses back to the
/// same value.
pub fn format_real<T: Scalar>(x: T) -> String {
    let a = x.abs();
    if x == T::zero() {
        "0".to_string()
    } else if a >= T::lit(1e-4) && a < T::lit(1e15) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
