//! Runtime choice between the two model families.

use crate::ad::Real;
use crate::error::{Error, Result};
use crate::flow::{FlowMap, ModelKind};
use crate::mlp::MlpFlowModel;
use crate::model::SympFlowModel;
use crate::systems::SystemSpec;
use crate::train::Trainable;

#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    SympFlow(SympFlowModel),
    Mlp(MlpFlowModel),
}

impl AnyModel {
    pub fn layers(&self) -> usize {
        match self {
            AnyModel::SympFlow(m) => m.layers(),
            AnyModel::Mlp(m) => m.layers(),
        }
    }

    /// Hidden width (fixed at 10 for the MLP).
    pub fn hidden(&self) -> usize {
        match self {
            AnyModel::SympFlow(m) => m.hidden(),
            AnyModel::Mlp(_) => crate::mlp::MLP_HIDDEN,
        }
    }

    pub fn as_sympflow(&self) -> Result<&SympFlowModel> {
        match self {
            AnyModel::SympFlow(m) => Ok(m),
            AnyModel::Mlp(_) => Err(Error::Unsupported(
                "Hamiltonian extraction is only defined for SympFlow models".into(),
            )),
        }
    }
}

impl FlowMap for AnyModel {
    fn half_dim(&self) -> usize {
        match self {
            AnyModel::SympFlow(m) => m.half_dim(),
            AnyModel::Mlp(m) => m.half_dim(),
        }
    }

    fn kind(&self) -> ModelKind {
        match self {
            AnyModel::SympFlow(_) => ModelKind::SympFlow,
            AnyModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            AnyModel::SympFlow(m) => m.params(),
            AnyModel::Mlp(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            AnyModel::SympFlow(m) => m.params_mut(),
            AnyModel::Mlp(m) => m.params_mut(),
        }
    }

    fn flow<T: Real>(&self, w: &[T], t: T, x: &[T]) -> Vec<T> {
        match self {
            AnyModel::SympFlow(m) => m.flow(w, t, x),
            AnyModel::Mlp(m) => m.flow(w, t, x),
        }
    }

    fn forward(&self, t: f64, x: &crate::flow::PhasePoint) -> Result<crate::flow::PhasePoint> {
        match self {
            AnyModel::SympFlow(m) => m.forward(t, x),
            AnyModel::Mlp(m) => m.forward(t, x),
        }
    }
}

impl Trainable for AnyModel {
    fn energy_term<T: Real>(&self, w: &[T], t: T, x: &[T], sys: &SystemSpec) -> T {
        match self {
            AnyModel::SympFlow(m) => m.energy_term(w, t, x, sys),
            AnyModel::Mlp(m) => m.energy_term(w, t, x, sys),
        }
    }

    fn residual_grad_fast(&self, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> Option<f64> {
        match self {
            AnyModel::SympFlow(m) => m.residual_grad_fast(t, x, sys, grad),
            AnyModel::Mlp(m) => m.residual_grad_fast(t, x, sys, grad),
        }
    }

    fn energy_grad_fast(&self, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> Option<f64> {
        match self {
            AnyModel::SympFlow(m) => m.energy_grad_fast(t, x, sys, grad),
            AnyModel::Mlp(m) => m.energy_grad_fast(t, x, sys, grad),
        }
    }

    fn supervised_grad_fast(&self, t: f64, x0: &[f64], y: &[f64], grad: &mut [f64]) -> Option<f64> {
        match self {
            AnyModel::SympFlow(m) => m.supervised_grad_fast(t, x0, y, grad),
            AnyModel::Mlp(m) => m.supervised_grad_fast(t, x0, y, grad),
        }
    }
}

impl From<SympFlowModel> for AnyModel {
    fn from(m: SympFlowModel) -> Self {
        AnyModel::SympFlow(m)
    }
}

impl From<MlpFlowModel> for AnyModel {
    fn from(m: MlpFlowModel) -> Self {
        AnyModel::Mlp(m)
    }
}
