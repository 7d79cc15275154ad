//! Reference integration: adaptive Dormand–Prince 5(4) with continuous
//! output, plus dataset generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::flow::PhasePoint;
use crate::par::{self, Execution};
use crate::systems::{BoxDomain, SystemSpec};

pub const DEFAULT_RTOL: f64 = 1e-10;
pub const DEFAULT_ATOL: f64 = 1e-12;

// Autonomous fields only, so the node coefficients c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step: `[t0, t0 + h]` and the five interpolation vectors.
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    coef: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> Vec<f64> {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coef;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }
}

/// Accepted steps of an integration together with a continuous extension
/// valid on the whole span.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    x0: Vec<f64>,
    t_end: f64,
    segments: Vec<Segment>,
    rejected: usize,
}

impl DenseSolution {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// `(t, state)` at every accepted step, starting at `t = 0`.
    pub fn samples(&self) -> Vec<(f64, PhasePoint)> {
        let mut out = vec![(0.0, PhasePoint::raw(self.x0.clone()))];
        for s in &self.segments {
            out.push((s.t0 + s.h, PhasePoint::raw(s.eval(s.t0 + s.h))));
        }
        out
    }

    pub fn final_state(&self) -> PhasePoint {
        match self.segments.last() {
            Some(s) => PhasePoint::raw(s.eval(s.t0 + s.h)),
            None => PhasePoint::raw(self.x0.clone()),
        }
    }

    /// State at any `t ∈ [0, t_end]`.
    pub fn at(&self, t: f64) -> Result<PhasePoint> {
        if !(0.0..=self.t_end).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside the integrated span [0, {}]",
                self.t_end
            )));
        }
        if t == 0.0 || self.segments.is_empty() {
            return Ok(PhasePoint::raw(self.x0.clone()));
        }
        let k = self.segments.partition_point(|s| s.t0 + s.h < t);
        let s = &self.segments[k.min(self.segments.len() - 1)];
        Ok(PhasePoint::raw(s.eval(t)))
    }
}

struct Stages {
    k: [Vec<f64>; 7],
}

/// One Dormand–Prince step. `k[0]` must hold `f(y)`; on return `k[6]` holds
/// `f(y_new)`. Returns `(y_new, error vector)`.
fn dopri_step(sys: &SystemSpec, y: &[f64], h: f64, st: &mut Stages) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let k = &mut st.k;
    let stage = |coeffs: &[(usize, f64)], k: &[Vec<f64>; 7]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] + h * coeffs.iter().map(|&(j, a)| a * k[j][i]).sum::<f64>())
            .collect()
    };
    let y2 = stage(&[(0, A21)], k);
    k[1] = sys.field(&y2);
    let y3 = stage(&[(0, A31), (1, A32)], k);
    k[2] = sys.field(&y3);
    let y4 = stage(&[(0, A41), (1, A42), (2, A43)], k);
    k[3] = sys.field(&y4);
    let y5 = stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], k);
    k[4] = sys.field(&y5);
    let y6 = stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], k);
    k[5] = sys.field(&y6);
    let ynew = stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], k);
    k[6] = sys.field(&ynew);
    let err = (0..n)
        .map(|i| {
            h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i])
        })
        .collect();
    (ynew, err)
}

fn scaled_norm(v: &[f64], y: &[f64], ynew: &[f64], rtol: f64, atol: f64) -> f64 {
    let s: f64 = v
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let sk = atol + rtol * y[i].abs().max(ynew[i].abs());
            (e / sk).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step(sys: &SystemSpec, y: &[f64], f0: &[f64], span: f64, rtol: f64, atol: f64) -> f64 {
    let d0 = scaled_norm(y, y, y, rtol, atol);
    let d1 = scaled_norm(f0, y, y, rtol, atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let f1 = sys.field(&y1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y, y, rtol, atol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `ẋ = J∇H(x)` from `x0` over `[0, t_end]`.
pub fn integrate(sys: &SystemSpec, x0: &PhasePoint, t_end: f64, rtol: f64, atol: f64) -> Result<DenseSolution> {
    sys.validate()?;
    check_dim("system half-dimension", sys.half_dim(), x0.d())?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    let mut y = x0.as_slice().to_vec();
    let mut st = Stages {
        k: std::array::from_fn(|_| Vec::new()),
    };
    st.k[0] = sys.field(&y);
    let mut t = 0.0;
    let mut h = initial_step(sys, &y, &st.k[0], t_end, rtol, atol);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut segments = Vec::new();
    let mut rejected = 0;
    while t < t_end {
        if h < 1e-14 * t_end {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let (ynew, err_vec) = dopri_step(sys, &y, h, &mut st);
        let err = scaled_norm(&err_vec, &y, &ynew, rtol, atol);
        if !err.is_finite() {
            return Err(Error::StepUnderflow { t, h });
        }
        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut hnew = h / fac;
            facold = err.max(1e-4);
            let k = &st.k;
            let n = y.len();
            let diff: Vec<f64> = (0..n).map(|i| ynew[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - diff[i]).collect();
            let r4: Vec<f64> = (0..n).map(|i| diff[i] - h * k[6][i] - bspl[i]).collect();
            let r5: Vec<f64> = (0..n)
                .map(|i| {
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i])
                })
                .collect();
            segments.push(Segment {
                t0: t,
                h,
                coef: [y.clone(), diff, bspl, r4, r5],
            });
            t = if last { t_end } else { t + h };
            y = ynew;
            st.k[0] = std::mem::take(&mut st.k[6]);
            if last_rejected {
                hnew = hnew.min(h);
            }
            last_rejected = false;
            h = hnew;
        } else {
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            last_rejected = true;
            rejected += 1;
        }
    }
    Ok(DenseSolution {
        x0: x0.as_slice().to_vec(),
        t_end,
        segments,
        rejected,
    })
}

/// [`integrate`] at the default tolerances.
pub fn integrate_default(sys: &SystemSpec, x0: &PhasePoint, t_end: f64) -> Result<DenseSolution> {
    integrate(sys, x0, t_end, DEFAULT_RTOL, DEFAULT_ATOL)
}

/// Fifth-order Dormand–Prince with `steps` equal steps and no error control.
pub fn integrate_fixed(sys: &SystemSpec, x0: &PhasePoint, t_end: f64, steps: usize) -> Result<PhasePoint> {
    check_dim("system half-dimension", sys.half_dim(), x0.d())?;
    if steps == 0 || !(t_end > 0.0) {
        return Err(Error::InvalidArgument("need steps >= 1 and t_end > 0".into()));
    }
    let h = t_end / steps as f64;
    let mut y = x0.as_slice().to_vec();
    let mut st = Stages {
        k: std::array::from_fn(|_| Vec::new()),
    };
    for _ in 0..steps {
        st.k[0] = sys.field(&y);
        y = dopri_step(sys, &y, h, &mut st).0;
    }
    Ok(PhasePoint::raw(y))
}

/// Reference states at arbitrary non-negative times (any order).
pub fn sample_states(sys: &SystemSpec, x0: &PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("sample times must be finite and >= 0".into()));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    if t_max == 0.0 {
        check_dim("system half-dimension", sys.half_dim(), x0.d())?;
        return Ok(times.iter().map(|_| x0.clone()).collect());
    }
    let sol = integrate_default(sys, x0, t_max)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = vec![x0.clone(); times.len()];
    for i in order {
        out[i] = sol.at(times[i])?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub traj_id: usize,
    pub t: f64,
    pub y: PhasePoint,
}

/// Sparse, possibly noisy observations of trajectories started in a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub initial_conditions: Vec<(usize, PhasePoint)>,
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl TrajectoryDataset {
    pub fn half_dim(&self) -> usize {
        self.initial_conditions.first().map_or(0, |(_, x)| x.d())
    }

    pub fn initial_condition(&self, traj_id: usize) -> Option<&PhasePoint> {
        self.initial_conditions
            .iter()
            .find(|(id, _)| *id == traj_id)
            .map(|(_, x)| x)
    }

    /// Every sample refers to a known trajectory and lies in `[0, Δt]`.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() || self.initial_conditions.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let d = self.half_dim();
        let mut ids: Vec<usize> = self.initial_conditions.iter().map(|(i, _)| *i).collect();
        ids.sort_unstable();
        for s in &self.samples {
            if ids.binary_search(&s.traj_id).is_err() {
                return Err(Error::Format(format!("sample refers to unknown trajectory {}", s.traj_id)));
            }
            if !(0.0..=self.dt).contains(&s.t) {
                return Err(Error::Format(format!("sample time {} outside [0, {}]", s.t, self.dt)));
            }
            check_dim("sample half-dimension", d, s.y.d())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub trajectories: usize,
    pub samples_per_trajectory: usize,
    pub dt: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Draw `N` initial conditions uniformly in the domain (embedded for the
/// augmented system), `M` uniform times per trajectory in `[0, Δt]`, and
/// observe the reference flow with additive Gaussian noise on the samples.
pub fn generate_dataset(
    sys: &SystemSpec,
    domain: &BoxDomain,
    spec: &DatasetSpec,
    exec: Execution,
) -> Result<TrajectoryDataset> {
    sys.validate()?;
    check_dim("domain dimension", sys.domain_dim(), domain.dim())?;
    if spec.trajectories == 0 || spec.samples_per_trajectory == 0 {
        return Err(Error::InvalidArgument("N and M must be at least 1".into()));
    }
    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("Δt must be positive, got {}", spec.dt)));
    }
    if !(spec.noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n_dim = 2 * sys.half_dim();
    // All randomness is drawn up front so integration can run in parallel.
    let plans: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..spec.trajectories)
        .map(|_| {
            let x0 = sys.sample_domain(domain, &mut rng);
            let times: Vec<f64> = (0..spec.samples_per_trajectory)
                .map(|_| rand::Rng::random_range(&mut rng, 0.0..=spec.dt))
                .collect();
            let eps: Vec<f64> = (0..spec.samples_per_trajectory * n_dim)
                .map(|_| if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 })
                .collect();
            (x0, times, eps)
        })
        .collect();
    let observed = par::map(exec, &plans, |(x0, times, _)| {
        sample_states(sys, &PhasePoint::raw(x0.clone()), times)
    });
    let mut initial_conditions = Vec::with_capacity(spec.trajectories);
    let mut samples = Vec::with_capacity(spec.trajectories * spec.samples_per_trajectory);
    for (n, ((x0, times, eps), ys)) in plans.into_iter().zip(observed).enumerate() {
        initial_conditions.push((n, PhasePoint::raw(x0)));
        for (m, (t, y)) in times.into_iter().zip(ys?).enumerate() {
            let y: Vec<f64> = y
                .into_vec()
                .into_iter()
                .zip(&eps[m * n_dim..(m + 1) * n_dim])
                .map(|(a, e)| a + e)
                .collect();
            samples.push(Sample {
                traj_id: n,
                t,
                y: PhasePoint::raw(y),
            });
        }
    }
    Ok(TrajectoryDataset {
        initial_conditions,
        samples,
        dt: spec.dt,
        noise_std: spec.noise_std,
        seed: spec.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{embed_physical, physical_state};

    fn pt(v: &[f64]) -> PhasePoint {
        PhasePoint::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn sho_returns_after_one_period() {
        let sol = integrate_default(&SystemSpec::sho(), &pt(&[1.0, 0.0]), 2.0 * std::f64::consts::PI).unwrap();
        assert!(sol.final_state().distance(&pt(&[1.0, 0.0])) < 1e-8);
    }

    #[test]
    fn henon_heiles_energy_is_conserved() {
        let sys = SystemSpec::HenonHeiles;
        let x0 = pt(&[0.3, -0.3, 0.3, 0.0]);
        let h0 = sys.hamiltonian(&x0).unwrap();
        let sol = integrate_default(&sys, &x0, 100.0).unwrap();
        for (_, x) in sol.samples() {
            assert!((sys.hamiltonian(&x).unwrap() - h0).abs() < 1e-8);
        }
    }

    #[test]
    fn damped_augmented_matches_analytic() {
        let sys = SystemSpec::damped(0.5);
        let sol = integrate_default(&sys, &embed_physical(1.0, 0.0), 10.0).unwrap();
        let a0 = sys.hamiltonian(&embed_physical(1.0, 0.0)).unwrap();
        for k in 0..=100 {
            let t = k as f64 * 0.1;
            let x = sol.at(t).unwrap();
            let phys = physical_state(&x).unwrap();
            let exact = sys.analytic_solution(&pt(&[1.0, 0.0]), t).unwrap();
            assert!(phys.distance(&exact) < 1e-7, "t={t}");
            assert!((sys.hamiltonian(&x).unwrap() - a0).abs() < 1e-7);
        }
    }

    #[test]
    fn dense_output_tracks_analytic_between_steps() {
        let sys = SystemSpec::sho();
        let x0 = pt(&[0.3, -0.8]);
        let times = [1.0, 0.0, 0.5, 3.3, 2.71];
        let got = sample_states(&sys, &x0, &times).unwrap();
        for (t, x) in times.iter().zip(&got) {
            let exact = sys.analytic_solution(&x0, *t).unwrap();
            assert!(x.distance(&exact) < 1e-9, "t={t}");
        }
        assert_eq!(got[1], x0);
    }

    #[test]
    fn sample_states_on_every_system() {
        let cases = [
            (SystemSpec::sho(), pt(&[1.0, 0.0])),
            (SystemSpec::HenonHeiles, pt(&[0.3, -0.3, 0.3, 0.0])),
            (SystemSpec::damped(0.5), embed_physical(1.0, 0.0)),
        ];
        for (sys, x0) in cases {
            let xs = sample_states(&sys, &x0, &[0.0, 0.5, 1.0]).unwrap();
            assert_eq!(xs[0], x0);
            let direct = integrate_fixed(&sys, &x0, 1.0, 400).unwrap();
            assert!(xs[2].distance(&direct) < 1e-10);
        }
    }

    #[test]
    fn fixed_step_order_is_five() {
        let sys = SystemSpec::sho();
        let x0 = pt(&[1.0, 0.0]);
        let exact = sys.analytic_solution(&x0, 2.0).unwrap();
        let e1 = integrate_fixed(&sys, &x0, 2.0, 10).unwrap().distance(&exact);
        let e2 = integrate_fixed(&sys, &x0, 2.0, 20).unwrap().distance(&exact);
        let order = (e1 / e2).log2();
        assert!(order >= 4.5, "observed order {order}");
    }

    #[test]
    fn invalid_arguments() {
        let sys = SystemSpec::sho();
        let x0 = pt(&[1.0, 0.0]);
        assert!(integrate(&sys, &x0, 0.0, 1e-10, 1e-12).is_err());
        assert!(integrate(&sys, &x0, 1.0, 0.0, 1e-12).is_err());
        assert!(integrate(&sys, &pt(&[1.0, 0.0, 0.0, 0.0]), 1.0, 1e-10, 1e-12).is_err());
        assert!(sample_states(&sys, &x0, &[-1.0]).is_err());
    }

    fn spec(n: usize, m: usize, eps: f64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            trajectories: n,
            samples_per_trajectory: m,
            dt: 1.0,
            noise_std: eps,
            seed,
        }
    }

    #[test]
    fn noiseless_dataset_matches_analytic_flow() {
        let sys = SystemSpec::sho();
        let dom = BoxDomain::cube(2, 1.2);
        let ds = generate_dataset(&sys, &dom, &spec(100, 50, 0.0, 7), Execution::Parallel).unwrap();
        assert_eq!(ds.initial_conditions.len(), 100);
        assert_eq!(ds.samples.len(), 5000);
        ds.validate().unwrap();
        for s in &ds.samples {
            let x0 = ds.initial_condition(s.traj_id).unwrap();
            assert!(dom.contains(x0.as_slice()));
            let exact = sys.analytic_solution(x0, s.t).unwrap();
            assert!(s.y.distance(&exact) < 1e-9);
        }
    }

    #[test]
    fn noise_has_requested_std() {
        let sys = SystemSpec::sho();
        let dom = BoxDomain::cube(2, 1.2);
        let ds = generate_dataset(&sys, &dom, &spec(100, 50, 0.1, 3), Execution::Sequential).unwrap();
        for c in 0..2 {
            let r: Vec<f64> = ds
                .samples
                .iter()
                .map(|s| {
                    let exact = sys.analytic_solution(ds.initial_condition(s.traj_id).unwrap(), s.t).unwrap();
                    s.y.as_slice()[c] - exact.as_slice()[c]
                })
                .collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let sd = (r.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
            assert!((sd - 0.1).abs() < 0.01, "sd {sd}");
        }
    }

    #[test]
    fn dataset_is_deterministic_across_execution_modes() {
        let sys = SystemSpec::HenonHeiles;
        let dom = BoxDomain::cube(4, 0.3);
        let a = generate_dataset(&sys, &dom, &spec(5, 4, 0.01, 11), Execution::Parallel).unwrap();
        let b = generate_dataset(&sys, &dom, &spec(5, 4, 0.01, 11), Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&sys, &dom, &spec(5, 4, 0.01, 12), Execution::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_errors() {
        let sys = SystemSpec::sho();
        let dom = BoxDomain::cube(2, 1.0);
        assert!(generate_dataset(&sys, &dom, &spec(0, 5, 0.0, 1), Execution::Sequential).is_err());
        let mut s = spec(2, 2, 0.0, 1);
        s.dt = 0.0;
        assert!(generate_dataset(&sys, &dom, &s, Execution::Sequential).is_err());
        s.dt = 1.0;
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        let aug = SystemSpec::damped(0.1);
        let ds = generate_dataset(&aug, &dom, &s, Execution::Sequential).unwrap();
        assert_eq!(ds.half_dim(), 2);
    }
}
