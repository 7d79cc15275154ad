//! Time-dependent symplectic neural flows.
//!
//! A [`model::SympFlowModel`] composes exact shear maps generated by small
//! potential networks, so every instance is symplectic and equals the
//! identity at `t = 0`. The crate also carries the unconstrained baseline
//! ([`mlp::MlpFlowModel`]), exact Hamiltonian extraction, reference
//! integration, training and evaluation.

pub mod ad;
mod adjoint;
pub mod any;
pub mod diffcore;
pub mod error;
pub mod eval;
pub mod flow;
pub mod hamiltonian;
pub mod integrate;
pub mod mlp;
pub mod model;
pub mod par;
pub mod systems;
pub mod train;

pub use any::AnyModel;
pub use error::{Error, Result};
pub use flow::{DerivativeMode, FlowMap, ModelKind, PhasePoint};
pub use mlp::MlpFlowModel;
pub use model::SympFlowModel;
pub use systems::{BoxDomain, SystemSpec};
