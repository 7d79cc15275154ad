//! The flat JSON run configuration read by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::any::AnyModel;
use crate::error::{Error, Result};
use crate::flow::{DerivativeMode, ModelKind, PhasePoint};
use crate::integrate::DatasetSpec;
use crate::mlp::MlpFlowModel;
use crate::model::SympFlowModel;
use crate::par::Execution;
use crate::systems::{BoxDomain, SystemSpec};
use crate::train::{Regime, TrainConfig};

use super::{Projection, RolloutSpec};

fn one() -> f64 {
    1.0
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn batch() -> usize {
    1024
}
fn batch_supervised() -> usize {
    256
}
fn lr() -> f64 {
    1e-3
}
fn horizon() -> f64 {
    1000.0
}
fn energy_step() -> f64 {
    0.1
}
fn section_step() -> f64 {
    0.01
}
fn hundred() -> usize {
    100
}
fn ks() -> Vec<u64> {
    vec![1, 10, 100]
}
fn regime() -> Regime {
    Regime::ResidualOnly
}

/// Every field a command may need. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `sho`, `henon_heiles`, `damped_augmented` or `null`.
    pub system: String,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Half-dimension of the `null` system.
    #[serde(default)]
    pub null_d: Option<usize>,

    pub model: ModelKind,
    #[serde(default = "five")]
    pub layers: usize,
    #[serde(default = "ten")]
    pub hidden: usize,

    #[serde(default = "regime")]
    pub regime: Regime,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default)]
    pub fine_tune_epochs: usize,
    #[serde(default = "lr")]
    pub learning_rate: f64,
    #[serde(default = "batch")]
    pub batch_collocation: usize,
    #[serde(default = "batch")]
    pub batch_matching: usize,
    #[serde(default = "batch_supervised")]
    pub batch_supervised: usize,
    #[serde(default = "one")]
    pub dt: f64,
    /// Lower corner of Ω (physical `(q, p)` for the augmented system).
    #[serde(default)]
    pub domain_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub domain_hi: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub checkpoint_every: usize,

    #[serde(default = "hundred")]
    pub trajectories: usize,
    #[serde(default = "hundred")]
    pub samples_per_trajectory: usize,
    #[serde(default)]
    pub noise_std: f64,
    /// Dataset directory for supervised training (defaults to `--out`).
    #[serde(default)]
    pub data_dir: Option<String>,

    #[serde(default = "horizon")]
    pub horizon: f64,
    #[serde(default = "energy_step")]
    pub step: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub projection: Option<Projection>,

    #[serde(default = "hundred")]
    pub metric_samples: usize,
    #[serde(default = "ks")]
    pub metric_ks: Vec<u64>,
    #[serde(default)]
    pub metric_seed: u64,

    #[serde(default = "section_step")]
    pub poincare_step: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.system()?;
        cfg.domain()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let sys = match self.system.as_str() {
            "sho" => SystemSpec::Sho { m: self.m, k: self.k },
            "henon_heiles" => SystemSpec::HenonHeiles,
            "damped_augmented" => SystemSpec::DampedAugmented {
                m: self.m,
                k: self.k,
                lambda: self.lambda,
            },
            "null" => SystemSpec::Null {
                d: self.null_d.unwrap_or(1),
            },
            other => return Err(Error::Config(format!("unknown system `{other}`"))),
        };
        sys.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(sys)
    }

    /// Ω from the config, or the per-system default: `[-1.2, 1.2]²` for
    /// the oscillator, `[-1, 1]⁴` for Hénon–Heiles, `[-1, 1]²` physical
    /// states for the damped system.
    pub fn domain(&self) -> Result<BoxDomain> {
        let sys = self.system()?;
        let n = sys.domain_dim();
        let domain = match (&self.domain_lo, &self.domain_hi) {
            (Some(lo), Some(hi)) => BoxDomain::new(lo.clone(), hi.clone()).map_err(|e| Error::Config(e.to_string()))?,
            (None, None) => match sys {
                SystemSpec::Sho { .. } => BoxDomain::cube(n, 1.2),
                _ => BoxDomain::cube(n, 1.0),
            },
            _ => return Err(Error::Config("set both domain_lo and domain_hi or neither".into())),
        };
        if domain.dim() != n {
            return Err(Error::Config(format!(
                "domain has dimension {}, system `{}` needs {n}",
                domain.dim(),
                sys.name()
            )));
        }
        Ok(domain)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            model_kind: self.model,
            regime: self.regime,
            epochs: self.epochs,
            fine_tune_epochs: self.fine_tune_epochs,
            learning_rate: self.learning_rate,
            batch_collocation: self.batch_collocation,
            batch_matching: self.batch_matching,
            batch_supervised: self.batch_supervised,
            dt: self.dt,
            domain: self.domain()?,
            seed: self.seed,
            derivative_mode: self.derivative_mode,
            execution: self.execution,
            checkpoint_every: self.checkpoint_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            trajectories: self.trajectories,
            samples_per_trajectory: self.samples_per_trajectory,
            dt: self.dt,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }

    /// Freshly initialized model drawn from `seed`.
    pub fn init_model(&self) -> Result<AnyModel> {
        use rand::SeedableRng;
        let d = self.system()?.half_dim();
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::Config("layers and hidden must be positive".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        Ok(match self.model {
            ModelKind::SympFlow => SympFlowModel::random(d, self.hidden, self.layers, &mut rng).into(),
            ModelKind::Mlp => {
                if self.hidden != crate::mlp::MLP_HIDDEN {
                    return Err(Error::Config(format!("the MLP width is fixed at {}", crate::mlp::MLP_HIDDEN)));
                }
                MlpFlowModel::random(d, self.layers, &mut rng).into()
            }
        })
    }

    /// Initial condition for rollouts and series: `x0` if given (physical
    /// `(q, p)` is embedded for the augmented system), else a per-system
    /// default.
    pub fn initial_state(&self) -> Result<PhasePoint> {
        let sys = self.system()?;
        let x = match (&self.x0, &sys) {
            (Some(x), SystemSpec::DampedAugmented { .. }) if x.len() == 2 => {
                crate::systems::embed_physical(x[0], x[1]).into_vec()
            }
            (Some(x), _) => x.clone(),
            (None, SystemSpec::Sho { .. }) => vec![1.0, 0.0],
            (None, SystemSpec::HenonHeiles) => vec![0.3, -0.3, 0.3, 0.0],
            (None, SystemSpec::DampedAugmented { .. }) => crate::systems::embed_physical(1.0, 0.0).into_vec(),
            (None, SystemSpec::Null { d }) => vec![0.0; 2 * d],
        };
        let x = PhasePoint::from_vec(x).map_err(|e| Error::Config(format!("x0: {e}")))?;
        if x.d() != sys.half_dim() {
            return Err(Error::Config(format!("x0 has {} entries, need {}", x.as_slice().len(), 2 * sys.half_dim())));
        }
        Ok(x)
    }

    /// Projection after each window: physical-limit for the augmented
    /// system unless overridden.
    pub fn projection(&self) -> Result<Projection> {
        Ok(self.projection.unwrap_or(if self.system()?.is_augmented() {
            Projection::PhysicalLimit
        } else {
            Projection::None
        }))
    }

    pub fn rollout_spec(&self, step: f64) -> Result<RolloutSpec> {
        let spec = RolloutSpec {
            dt: self.dt,
            horizon: self.horizon,
            step,
            x0: self.initial_state()?,
            projection: self.projection()?,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}
