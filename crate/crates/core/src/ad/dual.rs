use std::ops::{Add, Div, Mul, Neg, Sub};

use smallvec::SmallVec;

use super::Real;

/// A first-order dual number `re + eps·ε`, `ε² = 0`.
///
/// Generic over its component type so it can carry tape variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    /// A value with zero tangent.
    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    /// A value seeded with a unit tangent.
    pub fn variable(re: T) -> Self {
        Self {
            re,
            eps: T::from_f64(1.0),
        }
    }

    /// Pair a slice of primal values with a slice of tangents.
    pub fn seed(re: &[T], eps: &[T]) -> Vec<Self> {
        debug_assert_eq!(re.len(), eps.len());
        re.iter().zip(eps).map(|(&r, &e)| Self::new(r, e)).collect()
    }

    pub fn constants(re: &[T]) -> Vec<Self> {
        re.iter().map(|&r| Self::constant(r)).collect()
    }

    pub fn split(xs: &[Self]) -> (Vec<T>, Vec<T>) {
        xs.iter().map(|d| (d.re, d.eps)).unzip()
    }

    pub fn tangents(xs: &[Self]) -> Vec<T> {
        xs.iter().map(|d| d.eps).collect()
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let re = self.re / o.re;
        Self::new(re, (self.eps - re * o.eps) / o.re)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Real> Real for Dual<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }

    #[inline]
    fn value(&self) -> f64 {
        self.re.value()
    }

    #[inline]
    fn tanh(self) -> Self {
        let y = self.re.tanh();
        let slope = T::from_f64(1.0) - y * y;
        Self::new(y, slope * self.eps)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        let mut a_re: SmallVec<[T; 32]> = SmallVec::with_capacity(2 * n);
        let mut b_re: SmallVec<[T; 32]> = SmallVec::with_capacity(2 * n);
        a_re.extend(a.iter().map(|x| x.re));
        b_re.extend(b.iter().map(|x| x.re));
        let re = T::dot(&a_re, &b_re);
        // eps = sum a.re*b.eps + a.eps*b.re, as one dot of length 2n
        let mut lhs: SmallVec<[T; 32]> = a_re;
        lhs.extend(a.iter().map(|x| x.eps));
        let mut rhs: SmallVec<[T; 32]> = SmallVec::with_capacity(2 * n);
        rhs.extend(b.iter().map(|x| x.eps));
        rhs.extend_from_slice(&b_re);
        let eps = T::dot(&lhs, &rhs);
        Self::new(re, eps)
    }

    fn sum(a: &[Self]) -> Self {
        let re: SmallVec<[T; 32]> = a.iter().map(|x| x.re).collect();
        let eps: SmallVec<[T; 32]> = a.iter().map(|x| x.eps).collect();
        Self::new(T::sum(&re), T::sum(&eps))
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        Self::new(self.re.scale(c), self.eps.scale(c))
    }
}
