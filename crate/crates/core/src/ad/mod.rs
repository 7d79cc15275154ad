//! Scalar automatic differentiation used by every model evaluation.
//!
//! All network, flow and loss code is written once, generic over [`Real`].
//! Instantiating it with
//!
//! - `f64` gives plain evaluation,
//! - [`Dual`] gives exact directional (forward-mode) derivatives, used for
//!   time derivatives, Hessian-vector products and Jacobians,
//! - [`Var`] records onto a [`Tape`] for reverse-mode parameter gradients.
//!
//! The wrappers nest: `Dual<Var>` yields parameter gradients of quantities
//! that already contain a first derivative (the residual loss).

mod dual;
mod real;
mod tape;

pub use dual::Dual;
pub use real::Real;
pub use tape::{Tape, Var};

/// Lift a slice of plain values into any [`Real`].
pub fn lift<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::from_f64(x)).collect()
}

/// Plain values of a slice of [`Real`]s.
pub fn values<T: Real>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}
