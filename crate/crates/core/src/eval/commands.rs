//! The five commands behind the binary. Each reads a [`RunConfig`] and
//! writes its artifacts into an output directory. CSV outputs depend only
//! on the config and inputs; timing goes to the JSON reports.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::any::AnyModel;
use crate::error::{Error, Result};
use crate::flow::FlowMap;
use crate::integrate::generate_dataset;
use crate::train::{train, Regime, Target, TrainReport};

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::config::RunConfig;
use super::io::{self, read_dataset, write_dataset};
use super::{energy_drift_series, metric_report, model_section, reference_section, rollout_path, MetricSetup};

pub const MODEL_FILE: &str = "model.json";

/// Where a command writes and which checkpoint it reads or writes.
#[derive(Clone, Debug)]
pub struct Paths {
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Paths {
    fn model(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join(MODEL_FILE))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &serde_json::to_string_pretty(value)?)
}

fn load_model(cfg: &RunConfig, paths: &Paths) -> Result<AnyModel> {
    let path = paths.model();
    let model = load_checkpoint(&path)
        .map_err(|e| Error::Config(format!("cannot load checkpoint {}: {e}", path.display())))?
        .model;
    let d = cfg.system()?.half_dim();
    if model.half_dim() != d {
        return Err(Error::Config(format!(
            "checkpoint has d = {}, system `{}` needs d = {d}",
            model.half_dim(),
            cfg.system
        )));
    }
    Ok(model)
}

/// Sample a trajectory dataset: `ics.csv`, `samples.csv`, `dataset.json`.
pub fn generate_data(cfg: &RunConfig, paths: &Paths) -> Result<()> {
    let data = generate_dataset(&cfg.system()?, &cfg.domain()?, &cfg.dataset_spec(), cfg.execution)?;
    write_dataset(&data, &paths.out)
}

/// Train from a fresh seeded initialization. Writes the final checkpoint,
/// `loss.csv` and `train_report.json`; with `checkpoint_every > 0` also
/// `checkpoint_<epoch>.json`.
pub fn train_model(cfg: &RunConfig, paths: &Paths) -> Result<TrainReport> {
    std::fs::create_dir_all(&paths.out)?;
    let sys = cfg.system()?;
    let tcfg = cfg.train_config()?;
    let mut model = cfg.init_model()?;
    let data = if cfg.regime == Regime::Supervised {
        let dir = cfg.data_dir.as_ref().map_or_else(|| paths.out.clone(), PathBuf::from);
        Some(read_dataset(&dir).map_err(|e| Error::Config(format!("dataset in {}: {e}", dir.display())))?)
    } else {
        None
    };
    let target = match &data {
        Some(d) => Target::Dataset(d),
        None => Target::System(&sys),
    };
    let total = tcfg.epochs + tcfg.fine_tune_epochs;
    let out = paths.out.clone();
    let seed = cfg.seed;
    let mut observer = |epoch: usize, m: &AnyModel| -> Result<()> {
        if epoch < total {
            save_checkpoint(m, seed, &out.join(format!("checkpoint_{epoch}.json")))?;
        }
        Ok(())
    };
    let report = train(&mut model, &tcfg, target, &mut observer)?;
    save_checkpoint(&model, seed, &paths.model())?;
    write(&paths.out.join("loss.csv"), &io::loss_csv(&report.history))?;
    write_json(&paths.out.join("train_report.json"), &report)?;
    Ok(report)
}

/// Long-time rollout from `x0`: `rollout.csv` and `energy.csv`.
pub fn rollout(cfg: &RunConfig, paths: &Paths) -> Result<()> {
    let model = load_model(cfg, paths)?;
    let spec = cfg.rollout_spec(cfg.step)?;
    let path = rollout_path(&model, &spec)?;
    std::fs::create_dir_all(&paths.out)?;
    write(&paths.out.join("rollout.csv"), &io::path_csv(&path))?;
    let series = super::drift_series(&cfg.system()?, &path)?;
    write(&paths.out.join("energy.csv"), &io::drift_csv(&series))
}

/// Averaged metrics at every `k` in `metric_ks` plus the energy series:
/// `metrics.csv`, `energy.csv`, `metrics.json`.
pub fn evaluate(cfg: &RunConfig, paths: &Paths) -> Result<()> {
    let model = load_model(cfg, paths)?;
    let sys = cfg.system()?;
    let domain = cfg.domain()?;
    let setup = MetricSetup {
        sys: &sys,
        domain: &domain,
        samples: cfg.metric_samples,
        dt: cfg.dt,
        seed: cfg.metric_seed,
        execution: cfg.execution,
    };
    let spec = cfg.rollout_spec(cfg.step)?;
    let report = metric_report(&model, &setup, &cfg.metric_ks, &spec)?;
    std::fs::create_dir_all(&paths.out)?;
    write(&paths.out.join("metrics.csv"), &io::metrics_csv(&report))?;
    write(&paths.out.join("energy.csv"), &io::drift_csv(&report.drift))?;
    write_json(&paths.out.join("metrics.json"), &report)
}

/// Poincaré section of the reference trajectory (`section_reference.csv`)
/// and, when a checkpoint is given, of the model rollout
/// (`section_model.csv` and `energy_model.csv`).
pub fn poincare(cfg: &RunConfig, paths: &Paths) -> Result<()> {
    let sys = cfg.system()?;
    if !matches!(sys, crate::systems::SystemSpec::HenonHeiles) {
        return Err(Error::Config("poincare needs system = \"henon_heiles\"".into()));
    }
    let spec = cfg.rollout_spec(cfg.poincare_step)?;
    std::fs::create_dir_all(&paths.out)?;
    let reference = reference_section(&sys, &spec.x0, spec.horizon, spec.step)?;
    write(&paths.out.join("section_reference.csv"), &io::section_csv(&reference))?;
    if paths.checkpoint.is_some() {
        let model = load_model(cfg, paths)?;
        let section = model_section(&model, &spec)?;
        write(&paths.out.join("section_model.csv"), &io::section_csv(&section))?;
        let series = energy_drift_series(&model, &sys, &cfg.rollout_spec(cfg.step)?)?;
        write(&paths.out.join("energy_model.csv"), &io::drift_csv(&series))?;
    }
    Ok(())
}
