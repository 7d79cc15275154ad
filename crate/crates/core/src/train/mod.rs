//! Losses, optimizer, collocation sampling and the training regimes.

mod adam;
mod loss;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{
    loss_energy, loss_energy_reg, loss_ham_match, loss_residual, loss_supervised, Collocation, Trainable,
};

use crate::error::{check_dim, Error, Result};
use crate::flow::{DerivativeMode, ModelKind};
use crate::integrate::TrajectoryDataset;
use crate::par::Execution;
use crate::systems::{BoxDomain, SystemSpec};
use loss::{index_ics, mean_value_grad, Energy, Residual, Supervised};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Residual loss only.
    ResidualOnly,
    /// Residual plus the family's energy term.
    Regularized,
    /// `epochs` regularized, then `fine_tune_epochs` on the residual alone.
    /// The MLP keeps its energy term in both phases.
    Mixed,
    /// Mean squared error against a trajectory dataset.
    Supervised,
}

/// What a single optimizer step minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Residual,
    ResidualPlusEnergy,
    Supervised,
}

impl Regime {
    /// Objective during the main phase (`fine_tune == false`) or the
    /// fine-tuning phase.
    pub fn objective(self, kind: ModelKind, fine_tune: bool) -> Objective {
        match self {
            Regime::ResidualOnly => Objective::Residual,
            Regime::Regularized => Objective::ResidualPlusEnergy,
            Regime::Mixed if fine_tune && kind == ModelKind::SympFlow => Objective::Residual,
            Regime::Mixed => Objective::ResidualPlusEnergy,
            Regime::Supervised => Objective::Supervised,
        }
    }
}

fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    1024
}
fn default_batch_supervised() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub regime: Regime,
    /// Optimizer steps in the main phase.
    pub epochs: usize,
    #[serde(default)]
    pub fine_tune_epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Residual points drawn per step.
    #[serde(default = "default_batch")]
    pub batch_collocation: usize,
    /// Energy-term points drawn per step.
    #[serde(default = "default_batch")]
    pub batch_matching: usize,
    /// Dataset samples per step in the supervised regime.
    #[serde(default = "default_batch_supervised")]
    pub batch_supervised: usize,
    pub dt: f64,
    pub domain: BoxDomain,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
    #[serde(default)]
    pub execution: Execution,
    /// Call the observer every this many steps (0 = never).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.batch_collocation == 0 || self.batch_matching == 0 || self.batch_supervised == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.fine_tune_epochs > 0 && self.regime != Regime::Mixed {
            return bad("fine_tune_epochs only applies to the mixed regime".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Loss components of one optimizer step (absent terms are 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub residual: f64,
    pub energy: f64,
    pub supervised: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub param_count: usize,
    /// FNV-1a hash of the final parameter bits.
    pub param_digest: String,
    pub wall_clock_secs: f64,
    pub seed: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|e| e.total)
    }
}

/// Hex digest of the parameter bit patterns.
pub fn param_digest(params: &[f64]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in params {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

/// What the model is trained against.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    System(&'a SystemSpec),
    Dataset(&'a TrajectoryDataset),
}

/// Draw `n` i.i.d. points `t ~ U[0, Δt]`, `x ~ U(Ω)`.
pub fn sample_collocation(domain: &BoxDomain, dt: f64, n: usize, seed: u64) -> Result<Vec<Collocation>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("Δt must be positive, got {dt}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw(None, domain, dt, n, &mut rng))
}

/// Like [`sample_collocation`] but routed through the system so augmented
/// states are embedded in the physical limit.
fn draw<R: Rng + ?Sized>(sys: Option<&SystemSpec>, domain: &BoxDomain, dt: f64, n: usize, rng: &mut R) -> Vec<Collocation> {
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..=dt);
            let x = match sys {
                Some(s) => s.sample_domain(domain, rng),
                None => domain.sample(rng),
            };
            Collocation { t, x }
        })
        .collect()
}

/// Batches for one unsupervised step.
#[derive(Clone, Debug, Default)]
pub struct Batches {
    pub residual: Vec<Collocation>,
    pub matching: Vec<Collocation>,
}

/// The objective's value split into components.
pub fn total_loss<M: Trainable>(
    model: &M,
    objective: Objective,
    batches: &Batches,
    target: Target<'_>,
    mode: DerivativeMode,
    exec: Execution,
) -> Result<EpochLoss> {
    let mut out = EpochLoss {
        epoch: 0,
        total: 0.0,
        residual: 0.0,
        energy: 0.0,
        supervised: 0.0,
    };
    match (objective, target) {
        (Objective::Supervised, Target::Dataset(data)) => {
            out.supervised = loss_supervised(model, data, exec)?;
            out.total = out.supervised;
        }
        (Objective::Supervised, Target::System(_)) => {
            return Err(Error::Config("the supervised objective needs a dataset".into()))
        }
        (_, Target::Dataset(_)) => {
            return Err(Error::Config("unsupervised objectives need a system".into()))
        }
        (obj, Target::System(sys)) => {
            out.residual = loss_residual(model, &batches.residual, sys, mode, exec)?;
            if obj == Objective::ResidualPlusEnergy {
                out.energy = loss_energy(model, &batches.matching, sys, exec)?;
            }
            out.total = out.residual + out.energy;
        }
    }
    Ok(out)
}

fn check_finite(epoch: usize, l: &EpochLoss, grad: &[f64]) -> Result<()> {
    if !l.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch,
            detail: format!(
                "residual = {}, energy = {}, supervised = {}",
                l.residual, l.energy, l.supervised
            ),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch,
            detail: format!("gradient entry {i} is {} (loss {})", grad[i], l.total),
        });
    }
    Ok(())
}

/// Value and gradient of one step's objective.
fn step_value_grad<M: Trainable>(
    model: &M,
    objective: Objective,
    batches: &Batches,
    sys: Option<&SystemSpec>,
    sup: Option<(&TrajectoryDataset, &[usize], &[Vec<f64>])>,
    mode: DerivativeMode,
    exec: Execution,
) -> (EpochLoss, Vec<f64>) {
    let w = model.params();
    let mut l = EpochLoss {
        epoch: 0,
        total: 0.0,
        residual: 0.0,
        energy: 0.0,
        supervised: 0.0,
    };
    let grad = match objective {
        Objective::Supervised => {
            let (data, batch, ics) = sup.expect("supervised step without data");
            let (v, g) = mean_value_grad(&Supervised { model, data, batch, ics }, w, exec);
            l.supervised = v;
            g
        }
        obj => {
            let sys = sys.expect("unsupervised step without a system");
            let (v, mut g) = mean_value_grad(
                &Residual {
                    model,
                    points: &batches.residual,
                    sys,
                    mode,
                },
                w,
                exec,
            );
            l.residual = v;
            if obj == Objective::ResidualPlusEnergy {
                let (e, ge) = mean_value_grad(
                    &Energy {
                        model,
                        points: &batches.matching,
                        sys,
                    },
                    w,
                    exec,
                );
                l.energy = e;
                crate::par::add_into(&mut g, &ge);
            }
            g
        }
    };
    l.total = l.residual + l.energy + l.supervised;
    (l, grad)
}

/// Gradient of the objective in the parameters (exposed for checks).
pub fn objective_gradient<M: Trainable>(
    model: &M,
    objective: Objective,
    batches: &Batches,
    target: Target<'_>,
    mode: DerivativeMode,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    match target {
        Target::System(sys) => {
            if objective == Objective::Supervised {
                return Err(Error::Config("the supervised objective needs a dataset".into()));
            }
            if batches.residual.is_empty() || (objective == Objective::ResidualPlusEnergy && batches.matching.is_empty()) {
                return Err(Error::InvalidArgument("empty collocation batch".into()));
            }
            let (l, g) = step_value_grad(model, objective, batches, Some(sys), None, mode, exec);
            Ok((l.total, g))
        }
        Target::Dataset(data) => {
            if objective != Objective::Supervised {
                return Err(Error::Config("unsupervised objectives need a system".into()));
            }
            let ics = index_ics(data)?;
            let batch: Vec<usize> = (0..data.samples.len()).collect();
            let (l, g) = step_value_grad(model, objective, batches, None, Some((data, &batch, &ics)), mode, exec);
            Ok((l.total, g))
        }
    }
}

/// Train `model` in place. `observer(epoch, model)` runs every
/// `checkpoint_every` steps and after the last one.
pub fn train<M: Trainable>(
    model: &mut M,
    cfg: &TrainConfig,
    target: Target<'_>,
    observer: &mut dyn FnMut(usize, &M) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.model_kind != model.kind() {
        return Err(Error::KindMismatch {
            expected: cfg.model_kind.as_str().into(),
            found: model.kind().as_str().into(),
        });
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamState::new(model.param_count());
    let adam = cfg.adam();
    let total_epochs = cfg.epochs + cfg.fine_tune_epochs;
    let mut history = Vec::with_capacity(total_epochs);

    let (sys, data) = match (cfg.regime, target) {
        (Regime::Supervised, Target::Dataset(d)) => {
            check_dim("dataset half-dimension", model.half_dim(), d.half_dim())?;
            (None, Some(d))
        }
        (Regime::Supervised, Target::System(_)) => {
            return Err(Error::Config("the supervised regime needs a dataset".into()))
        }
        (_, Target::System(s)) => {
            s.validate()?;
            check_dim("system half-dimension", model.half_dim(), s.half_dim())?;
            check_dim("domain dimension", s.domain_dim(), cfg.domain.dim())?;
            (Some(s), None)
        }
        (_, Target::Dataset(_)) => {
            return Err(Error::Config("unsupervised regimes need a system".into()))
        }
    };
    let ics = match data {
        Some(d) => index_ics(d)?,
        None => Vec::new(),
    };
    let mut order: Vec<usize> = data.map_or(Vec::new(), |d| (0..d.samples.len()).collect());
    let mut cursor = order.len();

    for epoch in 0..total_epochs {
        let objective = cfg.regime.objective(model.kind(), epoch >= cfg.epochs);
        let mut batches = Batches::default();
        let mut batch_idx = Vec::new();
        match objective {
            Objective::Supervised => {
                let want = cfg.batch_supervised.min(order.len());
                while batch_idx.len() < want {
                    if cursor == order.len() {
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    let take = (want - batch_idx.len()).min(order.len() - cursor);
                    batch_idx.extend_from_slice(&order[cursor..cursor + take]);
                    cursor += take;
                }
            }
            obj => {
                batches.residual = draw(sys, &cfg.domain, cfg.dt, cfg.batch_collocation, &mut rng);
                if obj == Objective::ResidualPlusEnergy {
                    batches.matching = draw(sys, &cfg.domain, cfg.dt, cfg.batch_matching, &mut rng);
                }
            }
        }
        let sup = data.map(|d| (d, batch_idx.as_slice(), ics.as_slice()));
        let (mut l, grad) = step_value_grad(model, objective, &batches, sys, sup, cfg.derivative_mode, cfg.execution);
        l.epoch = epoch;
        check_finite(epoch, &l, &grad)?;
        adam_step(model.params_mut(), &grad, &mut opt, &adam)?;
        history.push(l);
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < total_epochs {
            observer(epoch + 1, model)?;
        }
    }
    if total_epochs > 0 {
        observer(total_epochs, model)?;
    }
    Ok(TrainReport {
        history,
        param_count: model.param_count(),
        param_digest: param_digest(model.params()),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}
