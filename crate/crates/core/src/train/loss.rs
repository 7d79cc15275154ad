//! Loss functions, generic over the scalar so one definition yields both
//! values and parameter gradients.

use crate::ad::{lift, Real, Tape};
use crate::adjoint;
use crate::error::{Error, Result};
use crate::flow::{DerivativeMode, FlowMap};
use crate::hamiltonian::extract_with;
use crate::integrate::TrajectoryDataset;
use crate::mlp::MlpFlowModel;
use crate::model::SympFlowModel;
use crate::par::{self, Execution};
use crate::systems::SystemSpec;

/// A collocation point `(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Collocation {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Models that can be trained: each family supplies its own energy term.
pub trait Trainable: FlowMap {
    /// Squared energy mismatch at one point. For SympFlow this is
    /// `(ℋ(ψ̄)(t, x) - H(x))²`, for the MLP `(H(ψ̄(t, x)) - H(x))²`.
    fn energy_term<T: Real>(&self, w: &[T], t: T, x: &[T], sys: &SystemSpec) -> T;

    /// Optional fast value-and-gradient of one residual term at the
    /// model's own parameters, added into `grad`.
    fn residual_grad_fast(&self, _t: f64, _x: &[f64], _sys: &SystemSpec, _grad: &mut [f64]) -> Option<f64> {
        None
    }

    /// Optional fast value-and-gradient of one energy term.
    fn energy_grad_fast(&self, _t: f64, _x: &[f64], _sys: &SystemSpec, _grad: &mut [f64]) -> Option<f64> {
        None
    }

    /// Optional fast value-and-gradient of one squared data misfit.
    fn supervised_grad_fast(&self, _t: f64, _x0: &[f64], _y: &[f64], _grad: &mut [f64]) -> Option<f64> {
        None
    }
}

impl Trainable for SympFlowModel {
    fn energy_term<T: Real>(&self, w: &[T], t: T, x: &[T], sys: &SystemSpec) -> T {
        (extract_with(self, w, t, x) - sys.energy(x)).square()
    }

    fn residual_grad_fast(&self, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> Option<f64> {
        Some(adjoint::residual_value_grad(self, t, x, sys, grad))
    }

    fn energy_grad_fast(&self, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> Option<f64> {
        Some(adjoint::ham_match_value_grad(self, t, x, sys, grad))
    }

    fn supervised_grad_fast(&self, t: f64, x0: &[f64], y: &[f64], grad: &mut [f64]) -> Option<f64> {
        Some(adjoint::supervised_value_grad(self, t, x0, y, grad))
    }
}

impl Trainable for MlpFlowModel {
    fn energy_term<T: Real>(&self, w: &[T], t: T, x: &[T], sys: &SystemSpec) -> T {
        let y = self.flow(w, t, x);
        (sys.energy(&y) - sys.energy(x)).square()
    }
}

/// A sum of per-item terms that depend on the parameters.
pub(crate) trait Term: Sync {
    fn len(&self) -> usize;
    fn eval<T: Real>(&self, w: &[T], i: usize) -> T;

    /// Value of term `i` at the model's parameters with its gradient added
    /// into `grad`, when a hand-written reverse pass exists.
    fn eval_grad_fast(&self, _i: usize, _grad: &mut [f64]) -> Option<f64> {
        None
    }
}

pub(crate) struct Residual<'a, M> {
    pub model: &'a M,
    pub points: &'a [Collocation],
    pub sys: &'a SystemSpec,
    pub mode: DerivativeMode,
}

impl<M: Trainable> Term for Residual<'_, M> {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn eval<T: Real>(&self, w: &[T], i: usize) -> T {
        let c = &self.points[i];
        let x: Vec<T> = lift(&c.x);
        let (state, vel) = self.model.state_and_velocity(w, T::from_f64(c.t), &x, self.mode);
        let f = self.sys.field(&state);
        let diff: Vec<T> = vel.iter().zip(&f).map(|(&a, &b)| a - b).collect();
        T::dot(&diff, &diff)
    }

    fn eval_grad_fast(&self, i: usize, grad: &mut [f64]) -> Option<f64> {
        if self.mode != DerivativeMode::Exact {
            return None;
        }
        let c = &self.points[i];
        self.model.residual_grad_fast(c.t, &c.x, self.sys, grad)
    }
}

pub(crate) struct Energy<'a, M> {
    pub model: &'a M,
    pub points: &'a [Collocation],
    pub sys: &'a SystemSpec,
}

impl<M: Trainable> Term for Energy<'_, M> {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn eval<T: Real>(&self, w: &[T], i: usize) -> T {
        let c = &self.points[i];
        let x: Vec<T> = lift(&c.x);
        self.model.energy_term(w, T::from_f64(c.t), &x, self.sys)
    }

    fn eval_grad_fast(&self, i: usize, grad: &mut [f64]) -> Option<f64> {
        let c = &self.points[i];
        self.model.energy_grad_fast(c.t, &c.x, self.sys, grad)
    }
}

pub(crate) struct Supervised<'a, M> {
    pub model: &'a M,
    pub data: &'a TrajectoryDataset,
    /// Indices into `data.samples`.
    pub batch: &'a [usize],
    /// `data.initial_conditions` indexed by trajectory id.
    pub ics: &'a [Vec<f64>],
}

impl<M: Trainable> Term for Supervised<'_, M> {
    fn len(&self) -> usize {
        self.batch.len()
    }

    fn eval<T: Real>(&self, w: &[T], i: usize) -> T {
        let s = &self.data.samples[self.batch[i]];
        let x0: Vec<T> = lift(&self.ics[s.traj_id]);
        let out = self.model.flow(w, T::from_f64(s.t), &x0);
        let diff: Vec<T> = out
            .iter()
            .zip(s.y.as_slice())
            .map(|(&a, &b)| a - T::from_f64(b))
            .collect();
        T::dot(&diff, &diff)
    }

    fn eval_grad_fast(&self, i: usize, grad: &mut [f64]) -> Option<f64> {
        let s = &self.data.samples[self.batch[i]];
        self.model
            .supervised_grad_fast(s.t, &self.ics[s.traj_id], s.y.as_slice(), grad)
    }
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(par::CHUNK)
        .map(|lo| (lo, (lo + par::CHUNK).min(n)))
        .collect()
}

/// Mean of the terms.
pub(crate) fn mean_value<K: Term>(term: &K, w: &[f64], exec: Execution) -> f64 {
    let n = term.len();
    let parts = par::map(exec, &chunk_ranges(n), |&(lo, hi)| {
        (lo..hi).map(|i| term.eval(w, i)).sum::<f64>()
    });
    parts.iter().sum::<f64>() / n as f64
}

/// Mean of the terms and its gradient in the parameters. Each chunk records
/// its own tape.
pub(crate) fn mean_value_grad<K: Term>(term: &K, w: &[f64], exec: Execution) -> (f64, Vec<f64>) {
    let n = term.len();
    let parts = par::map(exec, &chunk_ranges(n), |&(lo, hi)| {
        let mut grad = vec![0.0; w.len()];
        if let Some(first) = term.eval_grad_fast(lo, &mut grad) {
            let rest: f64 = (lo + 1..hi)
                .map(|i| term.eval_grad_fast(i, &mut grad).expect("fast path is uniform"))
                .sum();
            return (first + rest, grad);
        }
        let tape = Tape::new();
        let wv = tape.vars(w);
        let terms: Vec<_> = (lo..hi).map(|i| term.eval(&wv, i)).collect();
        let total = Real::sum(&terms);
        let adj = tape.gradient(total);
        (total.value(), adj.collect(&wv))
    });
    let mut value = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (v, g) in &parts {
        value += v;
        par::add_into(&mut grad, g);
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    (value * inv, grad)
}

fn nonempty(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(format!("empty {what}")));
    }
    Ok(())
}

fn check_points<M: FlowMap>(model: &M, points: &[Collocation]) -> Result<()> {
    nonempty(points.len(), "collocation batch")?;
    for c in points {
        crate::error::check_dim("collocation point", 2 * model.half_dim(), c.x.len())?;
    }
    Ok(())
}

pub(crate) fn index_ics(data: &TrajectoryDataset) -> Result<Vec<Vec<f64>>> {
    data.validate()?;
    let max_id = data.initial_conditions.iter().map(|(i, _)| *i).max().unwrap_or(0);
    let mut ics = vec![Vec::new(); max_id + 1];
    for (i, x) in &data.initial_conditions {
        ics[*i] = x.as_slice().to_vec();
    }
    Ok(ics)
}

/// `(1/NM) Σ ‖ψ̄(t_m^n, x_0^n) - y_m^n‖²`.
pub fn loss_supervised<M: Trainable>(model: &M, data: &TrajectoryDataset, exec: Execution) -> Result<f64> {
    let ics = index_ics(data)?;
    crate::error::check_dim("dataset half-dimension", model.half_dim(), data.half_dim())?;
    let batch: Vec<usize> = (0..data.samples.len()).collect();
    let term = Supervised {
        model,
        data,
        batch: &batch,
        ics: &ics,
    };
    Ok(mean_value(&term, model.params(), exec))
}

/// `(1/N) Σ ‖d/dt ψ̄(t_i, x_i) - J∇H(ψ̄(t_i, x_i))‖²`.
pub fn loss_residual<M: Trainable>(
    model: &M,
    points: &[Collocation],
    sys: &SystemSpec,
    mode: DerivativeMode,
    exec: Execution,
) -> Result<f64> {
    check_points(model, points)?;
    crate::error::check_dim("system half-dimension", model.half_dim(), sys.half_dim())?;
    let term = Residual {
        model,
        points,
        sys,
        mode,
    };
    Ok(mean_value(&term, model.params(), exec))
}

/// `(1/M) Σ (ℋ(ψ̄)(t_i, x_i) - H(x_i))²`.
pub fn loss_ham_match(
    model: &SympFlowModel,
    points: &[Collocation],
    sys: &SystemSpec,
    exec: Execution,
) -> Result<f64> {
    check_points(model, points)?;
    crate::error::check_dim("system half-dimension", model.half_dim(), sys.half_dim())?;
    Ok(mean_value(&Energy { model, points, sys }, model.params(), exec))
}

/// `(1/M) Σ (H(ψ̄(t_i, x_i)) - H(x_i))²`.
pub fn loss_energy_reg(
    model: &MlpFlowModel,
    points: &[Collocation],
    sys: &SystemSpec,
    exec: Execution,
) -> Result<f64> {
    check_points(model, points)?;
    crate::error::check_dim("system half-dimension", model.half_dim(), sys.half_dim())?;
    Ok(mean_value(&Energy { model, points, sys }, model.params(), exec))
}

/// The energy term of either family, dispatched on the model type.
pub fn loss_energy<M: Trainable>(model: &M, points: &[Collocation], sys: &SystemSpec, exec: Execution) -> Result<f64> {
    check_points(model, points)?;
    crate::error::check_dim("system half-dimension", model.half_dim(), sys.half_dim())?;
    Ok(mean_value(&Energy { model, points, sys }, model.params(), exec))
}
