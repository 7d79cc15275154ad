//! Intersections of a Hénon–Heiles trajectory with `q_x = 0`, `p_x > 0`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{FlowMap, PhasePoint};
use crate::hamiltonian::split_time;
use crate::integrate::{integrate, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::systems::SystemSpec;

use super::{rollout_path, RolloutSpec};

/// A crossing: its time, the plotted coordinates and the full state
/// (with `q_x` set to exactly 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub t: f64,
    pub q_y: f64,
    pub p_y: f64,
    pub state: PhasePoint,
}

fn crossing(a: &PhasePoint, b: &PhasePoint) -> Option<f64> {
    let (qa, qb) = (a.as_slice()[0], b.as_slice()[0]);
    (qa < 0.0 && qb >= 0.0).then(|| -qa / (qb - qa))
}

fn point_at(t: f64, mut x: Vec<f64>) -> Option<SectionPoint> {
    if x.len() != 4 || x[2] <= 0.0 {
        return None;
    }
    x[0] = 0.0;
    Some(SectionPoint {
        t,
        q_y: x[1],
        p_y: x[3],
        state: PhasePoint::raw(x),
    })
}

/// Upward crossings of `q_x = 0` between consecutive samples, located by
/// linear interpolation in `q_x`. Paths of non-4-dimensional states give
/// an empty section.
pub fn poincare_section(path: &[(f64, PhasePoint)]) -> Vec<SectionPoint> {
    path.windows(2)
        .filter_map(|w| {
            let ((ta, a), (tb, b)) = (&w[0], &w[1]);
            if a.as_slice().len() != 4 {
                return None;
            }
            let lam = crossing(a, b)?;
            let x: Vec<f64> = a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(u, v)| u + lam * (v - u))
                .collect();
            point_at(ta + lam * (tb - ta), x)
        })
        .collect()
}

/// Like [`poincare_section`], but each bracketed crossing time is refined
/// on the continuous trajectory `state_at` (Illinois false position) until
/// `|q_x| < tol` or the bracket collapses.
pub fn poincare_section_refined<F>(path: &[(f64, PhasePoint)], state_at: F, tol: f64) -> Result<Vec<SectionPoint>>
where
    F: Fn(f64) -> Result<PhasePoint>,
{
    let mut out = Vec::new();
    for w in path.windows(2) {
        let ((ta, a), (tb, b)) = (&w[0], &w[1]);
        if a.as_slice().len() != 4 || crossing(a, b).is_none() {
            continue;
        }
        let (mut lo, mut hi) = (*ta, *tb);
        let (mut flo, mut fhi) = (a.as_slice()[0], b.as_slice()[0]);
        let mut state = b.clone();
        let mut t = hi;
        let mut side = 0i8;
        for _ in 0..100 {
            t = (lo * fhi - hi * flo) / (fhi - flo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            state = state_at(t)?;
            let f = state.as_slice()[0];
            if f.abs() < tol || hi - lo < 1e-15 * hi.abs().max(1.0) {
                break;
            }
            if f < 0.0 {
                lo = t;
                flo = f;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                fhi = f;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
        }
        if let Some(p) = point_at(t, state.into_vec()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Section of the reference trajectory from `x0` over `[0, horizon]`,
/// bracketed on a `step` grid and refined on the dense output.
pub fn reference_section(sys: &SystemSpec, x0: &PhasePoint, horizon: f64, step: f64) -> Result<Vec<SectionPoint>> {
    let sol = integrate(sys, x0, horizon, DEFAULT_RTOL, DEFAULT_ATOL)?;
    let path = grid(horizon, step)
        .into_iter()
        .map(|t| Ok((t, sol.at(t)?)))
        .collect::<Result<Vec<_>>>()?;
    poincare_section_refined(&path, |t| sol.at(t), REFINE_TOL)
}

/// Section of a model rollout, bracketed on the spec's grid and refined on
/// the continuous rollout `t ↦ ψ̄_{t - kΔt}(ψ_{kΔt}(x0))`.
pub fn model_section<M: FlowMap>(model: &M, spec: &RolloutSpec) -> Result<Vec<SectionPoint>> {
    let path = rollout_path(model, spec)?;
    let windows = (spec.horizon / spec.dt).floor() as usize;
    let mut bases = Vec::with_capacity(windows + 1);
    bases.push(spec.x0.clone());
    for _ in 0..windows {
        let next = spec.projection.apply(model.forward(spec.dt, bases.last().expect("nonempty"))?)?;
        bases.push(next);
    }
    let state_at = |t: f64| -> Result<PhasePoint> {
        let (k, rem) = split_time(spec.dt, t)?;
        let base = &bases[(k as usize).min(windows)];
        spec.projection.apply(model.forward(rem, base)?)
    };
    poincare_section_refined(&path, state_at, REFINE_TOL)
}

const REFINE_TOL: f64 = 1e-13;

fn grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|j| (j as f64 * step).min(horizon)).collect();
    if ts.last().is_some_and(|&t| t < horizon) {
        ts.push(horizon);
    }
    ts
}
