//! Long-time rollout, evaluation metrics, Poincaré sections and the file
//! formats used by the command line.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod io;
mod poincare;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use poincare::{model_section, poincare_section, poincare_section_refined, reference_section, SectionPoint};

use crate::error::{check_dim, Error, Result};
use crate::flow::{FlowMap, PhasePoint};
use crate::hamiltonian::split_time;
use crate::integrate::{integrate, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::par::{self, Execution};
use crate::systems::{physical_limit_project, physical_state, BoxDomain, SystemSpec};

/// Optional map applied after every window of a rollout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    #[default]
    None,
    /// Project onto the physical limit of the augmented damped system.
    PhysicalLimit,
}

impl Projection {
    fn apply(self, x: PhasePoint) -> Result<PhasePoint> {
        match self {
            Projection::None => Ok(x),
            Projection::PhysicalLimit => physical_limit_project(&x),
        }
    }
}

/// Output grid of a rollout: `t = 0, step, 2 step, …, T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSpec {
    pub dt: f64,
    pub horizon: f64,
    pub step: f64,
    pub x0: PhasePoint,
    #[serde(default)]
    pub projection: Projection,
}

impl RolloutSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= self.dt && self.dt <= self.horizon && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rollout needs 0 < step <= dt <= T (step {}, dt {}, T {})",
                self.step, self.dt, self.horizon
            )));
        }
        Ok(())
    }

    /// Sample times; the last one is `T` even when `T/step` is fractional.
    pub fn times(&self) -> Vec<f64> {
        let n = (self.horizon / self.step + 1e-9).floor() as usize;
        let mut ts: Vec<f64> = (0..=n).map(|j| j as f64 * self.step).collect();
        if let Some(&last) = ts.last() {
            if last < self.horizon {
                ts.push(self.horizon);
            } else {
                *ts.last_mut().expect("nonempty") = self.horizon.min(last);
            }
        }
        ts
    }
}

/// `ψ_t(x0) = ψ̄_{t - Δt⌊t/Δt⌋} ∘ (ψ̄_Δt)^{⌊t/Δt⌋} (x0)`.
pub fn rollout<M: FlowMap>(model: &M, dt: f64, t: f64, x0: &PhasePoint) -> Result<PhasePoint> {
    rollout_projected(model, dt, t, x0, Projection::None)
}

/// [`rollout`] with `projection` applied after every application of the
/// network, the remainder step included.
pub fn rollout_projected<M: FlowMap>(
    model: &M,
    dt: f64,
    t: f64,
    x0: &PhasePoint,
    projection: Projection,
) -> Result<PhasePoint> {
    model.check_point(0.0, x0)?;
    let (k, rem) = split_time(dt, t)?;
    let mut x = x0.clone();
    for _ in 0..k {
        x = projection.apply(model.forward(dt, &x)?)?;
    }
    if rem > 0.0 || k == 0 {
        x = model.forward(rem, &x)?;
        if rem > 0.0 {
            x = projection.apply(x)?;
        }
    }
    Ok(x)
}

/// Rollout sampled on the spec's grid. Windows are advanced once and
/// shared, so every entry equals the corresponding [`rollout_projected`]
/// call bit for bit.
pub fn rollout_path<M: FlowMap>(model: &M, spec: &RolloutSpec) -> Result<Vec<(f64, PhasePoint)>> {
    spec.validate()?;
    model.check_point(0.0, &spec.x0)?;
    let mut out = Vec::new();
    let mut window = 0u64;
    let mut base = spec.x0.clone();
    for t in spec.times() {
        let (k, rem) = split_time(spec.dt, t)?;
        while window < k {
            base = spec.projection.apply(model.forward(spec.dt, &base)?)?;
            window += 1;
        }
        let x = if rem > 0.0 {
            spec.projection.apply(model.forward(rem, &base)?)?
        } else if k == 0 {
            model.forward(0.0, &base)?
        } else {
            base.clone()
        };
        out.push((t, x));
    }
    Ok(out)
}

/// A relative metric averaged over the samples whose denominator was usable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub mean: f64,
    pub used: usize,
    pub skipped: usize,
}

const TINY: f64 = 1e-12;

fn average(values: impl Iterator<Item = Option<f64>>) -> Averaged {
    let (mut sum, mut used, mut skipped) = (0.0, 0, 0);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    Averaged {
        mean: if used > 0 { sum / used as f64 } else { f64::NAN },
        used,
        skipped,
    }
}

/// `‖a - b‖ / ‖b‖`, or `None` when `‖b‖ < 1e-12`.
pub fn relative_error(approx: &PhasePoint, reference: &PhasePoint) -> Option<f64> {
    let n = reference.norm();
    (n >= TINY).then(|| approx.distance(reference) / n)
}

/// `|H(y) - H(x)| / |H(x)|`, or `None` when `|H(x)| < 1e-12`.
pub fn relative_energy_change(sys: &SystemSpec, x: &PhasePoint, y: &PhasePoint) -> Result<Option<f64>> {
    let h0 = sys.hamiltonian(x)?;
    let h = sys.hamiltonian(y)?;
    Ok((h0.abs() >= TINY).then(|| (h - h0).abs() / h0.abs()))
}

/// Seeded initial conditions for the metrics (embedded for the augmented
/// system).
pub fn metric_points(sys: &SystemSpec, domain: &BoxDomain, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    check_dim("domain dimension", sys.domain_dim(), domain.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| PhasePoint::raw(sys.sample_domain(domain, &mut rng)))
        .collect())
}

/// Inputs shared by the averaged metrics.
#[derive(Clone, Debug)]
pub struct MetricSetup<'a> {
    pub sys: &'a SystemSpec,
    pub domain: &'a BoxDomain,
    pub samples: usize,
    pub dt: f64,
    pub seed: u64,
    pub execution: Execution,
}

/// `(1/I) Σ ‖ψ(kΔt, x_i) - φ_{kΔt}(x_i)‖ / ‖φ_{kΔt}(x_i)‖`.
pub fn avg_relative_error<M: FlowMap>(model: &M, setup: &MetricSetup<'_>, k: u64) -> Result<Averaged> {
    let xs = metric_points(setup.sys, setup.domain, setup.samples, setup.seed)?;
    let t = k as f64 * setup.dt;
    let per = par::map(setup.execution, &xs, |x| -> Result<Option<f64>> {
        let pred = rollout(model, setup.dt, t, x)?;
        let exact = if t == 0.0 {
            x.clone()
        } else {
            integrate(setup.sys, x, t, DEFAULT_RTOL, DEFAULT_ATOL)?.final_state()
        };
        Ok(relative_error(&pred, &exact))
    });
    Ok(average(per.into_iter().collect::<Result<Vec<_>>>()?.into_iter()))
}

/// `(1/I) Σ |H(ψ(kΔt, x_i)) - H(x_i)| / |H(x_i)|`.
pub fn avg_energy_variation<M: FlowMap>(model: &M, setup: &MetricSetup<'_>, k: u64) -> Result<Averaged> {
    let xs = metric_points(setup.sys, setup.domain, setup.samples, setup.seed)?;
    let t = k as f64 * setup.dt;
    let per = par::map(setup.execution, &xs, |x| -> Result<Option<f64>> {
        let pred = rollout(model, setup.dt, t, x)?;
        relative_energy_change(setup.sys, x, &pred)
    });
    Ok(average(per.into_iter().collect::<Result<Vec<_>>>()?.into_iter()))
}

/// One row of an energy series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub t: f64,
    pub energy: f64,
    /// `H(ψ_t(x0)) - H(x0)`.
    pub drift: f64,
    /// `drift / |H(x0)|` (0 when `H(x0) = 0`).
    pub relative: f64,
    /// `drift / t`, one reading of "normalised over the integration time"
    /// (0 at `t = 0`).
    pub per_time: f64,
}

/// Energy drift along a rollout path.
pub fn drift_series(sys: &SystemSpec, path: &[(f64, PhasePoint)]) -> Result<Vec<DriftPoint>> {
    let Some((_, x0)) = path.first() else {
        return Ok(Vec::new());
    };
    let h0 = sys.hamiltonian(x0)?;
    path.iter()
        .map(|(t, x)| {
            let energy = sys.hamiltonian(x)?;
            let drift = energy - h0;
            Ok(DriftPoint {
                t: *t,
                energy,
                drift,
                relative: if h0 != 0.0 { drift / h0.abs() } else { 0.0 },
                per_time: if *t > 0.0 { drift / t } else { 0.0 },
            })
        })
        .collect()
}

/// `H(ψ_t(x0)) - H(x0)` on `t = 0, step, …, T`.
pub fn energy_drift_series<M: FlowMap>(model: &M, sys: &SystemSpec, spec: &RolloutSpec) -> Result<Vec<DriftPoint>> {
    drift_series(sys, &rollout_path(model, spec)?)
}

/// Largest `|relative drift|` of a series.
pub fn max_relative_drift(series: &[DriftPoint]) -> f64 {
    series.iter().fold(0.0, |m, p| m.max(p.relative.abs()))
}

/// Least-squares slope of `log|drift|` against `log t` over `t ≥ t_min`,
/// ignoring `|drift| < 1e-14`.
pub fn drift_slope(series: &[(f64, f64)], t_min: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, d)| *t >= t_min && *t > 0.0 && d.abs() >= 1e-14)
        .map(|(t, d)| (t.ln(), d.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need two usable points at t >= {t_min} for a slope, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all usable points share one time".into()));
    }
    Ok(sxy / sxx)
}

/// Root-mean-square distance between the physical `(q, p)` of a projected
/// augmented rollout and the closed-form damped solution, over the grid of
/// `spec` (`x0` must lie in the physical limit).
pub fn damped_l2_error<M: FlowMap>(model: &M, sys: &SystemSpec, spec: &RolloutSpec) -> Result<f64> {
    if !sys.is_augmented() {
        return Err(Error::InvalidArgument("damped_l2_error needs the augmented system".into()));
    }
    let x0 = physical_state(&spec.x0)?;
    let path = rollout_path(model, spec)?;
    let mut sum = 0.0;
    for (t, x) in &path {
        let exact = sys.analytic_solution(&x0, *t)?;
        sum += physical_state(x)?.distance(&exact).powi(2);
    }
    Ok((sum / path.len() as f64).sqrt())
}

/// Per-horizon metrics plus the drift series from one initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub horizons: Vec<HorizonMetrics>,
    pub drift: Vec<DriftPoint>,
    pub drift_slope: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub k: u64,
    pub relative_error: Averaged,
    pub energy_variation: Averaged,
}

pub fn metric_report<M: FlowMap>(
    model: &M,
    setup: &MetricSetup<'_>,
    ks: &[u64],
    series_spec: &RolloutSpec,
) -> Result<MetricReport> {
    let horizons = ks
        .iter()
        .map(|&k| {
            Ok(HorizonMetrics {
                k,
                relative_error: avg_relative_error(model, setup, k)?,
                energy_variation: avg_energy_variation(model, setup, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let drift = energy_drift_series(model, setup.sys, series_spec)?;
    let pairs: Vec<(f64, f64)> = drift.iter().map(|p| (p.t, p.drift)).collect();
    Ok(MetricReport {
        horizons,
        drift_slope: drift_slope(&pairs, 10.0).ok(),
        drift,
        samples: setup.samples,
    })
}

#[cfg(test)]
mod tests;
