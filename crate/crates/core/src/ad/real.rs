use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// The scalar interface shared by `f64`, [`super::Dual`] and [`super::Var`].
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant (zero derivative in every direction).
    fn from_f64(v: f64) -> Self;

    /// The primal value.
    fn value(&self) -> f64;

    fn tanh(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    /// `sum_i a_i * b_i`. Implementations may record this as a single node.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = Self::zero();
        for (&x, &y) in a.iter().zip(b) {
            acc = acc + x * y;
        }
        acc
    }

    /// `sum_i a_i`.
    fn sum(a: &[Self]) -> Self {
        a.iter().fold(Self::zero(), |acc, &x| acc + x)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}
