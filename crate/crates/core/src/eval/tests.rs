use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{from_json, load_mlp, load_sympflow, save_checkpoint, to_json};
use super::io::{path_csv, read_dataset, read_path_csv, write_dataset};
use super::*;
use crate::any::AnyModel;
use crate::ad::Real;
use crate::flow::ModelKind;
use crate::integrate::{generate_dataset, DatasetSpec};
use crate::mlp::MlpFlowModel;
use crate::model::SympFlowModel;

fn pt(v: &[f64]) -> PhasePoint {
    PhasePoint::from_vec(v.to_vec()).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The exact SHO flow scaled by `gain`. Only `forward` is meaningful.
#[derive(Clone)]
struct ScaledShoFlow {
    gain: f64,
}

impl FlowMap for ScaledShoFlow {
    fn half_dim(&self) -> usize {
        1
    }
    fn kind(&self) -> ModelKind {
        ModelKind::Mlp
    }
    fn params(&self) -> &[f64] {
        &[]
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }
    fn flow<T: Real>(&self, _w: &[T], _t: T, _x: &[T]) -> Vec<T> {
        unreachable!("stand-in only supports forward")
    }
    fn forward(&self, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
        let y = SystemSpec::sho().analytic_solution(x, t)?;
        PhasePoint::from_vec(y.as_slice().iter().map(|v| v * self.gain).collect())
    }
}

fn sho_setup<'a>(sys: &'a SystemSpec, domain: &'a BoxDomain) -> MetricSetup<'a> {
    MetricSetup {
        sys,
        domain,
        samples: 20,
        dt: 1.0,
        seed: 4,
        execution: Execution::Sequential,
    }
}

#[test]
fn rollout_at_zero_is_the_input() {
    let m = SympFlowModel::random(1, 10, 3, &mut rng(1));
    let x = pt(&[0.4, -0.7]);
    assert_eq!(rollout(&m, 1.0, 0.0, &x).unwrap(), x);
}

#[test]
fn rollout_composes_windows_then_remainder() {
    let m = SympFlowModel::random(1, 10, 3, &mut rng(2));
    let x = pt(&[1.0, 0.0]);
    let manual = m.forward(0.5, &m.forward(1.0, &m.forward(1.0, &x).unwrap()).unwrap()).unwrap();
    assert_eq!(rollout(&m, 1.0, 2.5, &x).unwrap(), manual);
    let whole = m.forward(1.0, &m.forward(1.0, &m.forward(1.0, &x).unwrap()).unwrap()).unwrap();
    assert_eq!(rollout(&m, 1.0, 3.0, &x).unwrap(), whole);
}

#[test]
fn rollout_is_forward_inside_first_window() {
    let m = MlpFlowModel::random(1, 5, &mut rng(3));
    let x = pt(&[0.2, 0.9]);
    for t in [0.0, 0.1, 0.37, 0.999] {
        assert_eq!(rollout(&m, 1.0, t, &x).unwrap(), m.forward(t, &x).unwrap());
    }
}

#[test]
fn rollout_rejects_bad_window() {
    let m = SympFlowModel::zeros(1, 10, 1);
    assert!(rollout(&m, 0.0, 1.0, &pt(&[1.0, 0.0])).is_err());
    assert!(rollout(&m, 1.0, 1.0, &pt(&[1.0, 0.0, 0.0, 0.0])).is_err());
}

#[test]
fn rollout_path_matches_individual_calls() {
    let m = SympFlowModel::random(1, 10, 2, &mut rng(5));
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 7.3,
        step: 0.1,
        x0: pt(&[1.0, 0.0]),
        projection: Projection::None,
    };
    let path = rollout_path(&m, &spec).unwrap();
    assert_eq!(path.first().unwrap().0, 0.0);
    assert_eq!(path.last().unwrap().0, 7.3);
    assert!(path.windows(2).all(|w| w[0].0 < w[1].0));
    for (t, x) in path.iter().step_by(7) {
        assert_eq!(&rollout(&m, 1.0, *t, &spec.x0).unwrap(), x, "t = {t}");
    }
    let (t, x) = path.last().unwrap();
    assert_eq!(&rollout(&m, 1.0, *t, &spec.x0).unwrap(), x);
}

#[test]
fn projected_rollout_path_matches_individual_calls() {
    let m = SympFlowModel::random(2, 10, 2, &mut rng(6));
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 4.0,
        step: 0.25,
        x0: crate::systems::embed_physical(1.0, 0.0),
        projection: Projection::PhysicalLimit,
    };
    for (t, x) in rollout_path(&m, &spec).unwrap() {
        let direct = rollout_projected(&m, 1.0, t, &spec.x0, Projection::PhysicalLimit).unwrap();
        assert_eq!(direct, x);
        if t > 0.0 {
            assert_eq!(physical_limit_project(&x).unwrap(), x);
        }
    }
}

#[test]
fn rollout_spec_validation() {
    let mut spec = RolloutSpec {
        dt: 1.0,
        horizon: 10.0,
        step: 0.1,
        x0: pt(&[1.0, 0.0]),
        projection: Projection::None,
    };
    assert!(spec.validate().is_ok());
    spec.step = 2.0;
    assert!(spec.validate().is_err());
    spec.step = 0.1;
    spec.horizon = 0.5;
    assert!(spec.validate().is_err());
}

#[test]
fn hand_set_relative_error() {
    assert!((relative_error(&pt(&[1.1, 0.0]), &pt(&[1.0, 0.0])).unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(relative_error(&pt(&[1.0, 0.0]), &pt(&[0.0, 0.0])), None);
}

#[test]
fn hand_set_energy_change() {
    let sys = SystemSpec::sho();
    // H goes 0.5 -> 0.605.
    let v = relative_energy_change(&sys, &pt(&[1.0, 0.0]), &pt(&[1.1, 0.0])).unwrap().unwrap();
    assert!((v - 0.21).abs() < 1e-14);
    assert_eq!(relative_energy_change(&sys, &pt(&[0.0, 0.0]), &pt(&[1.0, 0.0])).unwrap(), None);
}

#[test]
fn exact_flow_scores_zero() {
    let sys = SystemSpec::sho();
    let domain = BoxDomain::cube(2, 1.2);
    let setup = sho_setup(&sys, &domain);
    let exact = ScaledShoFlow { gain: 1.0 };
    for k in [1, 10] {
        let e = avg_relative_error(&exact, &setup, k).unwrap();
        assert!(e.mean < 1e-8, "k = {k}: {}", e.mean);
        assert_eq!((e.used, e.skipped), (20, 0));
        assert!(avg_energy_variation(&exact, &setup, k).unwrap().mean < 1e-12);
    }
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 20.0,
        step: 0.5,
        x0: pt(&[1.0, 0.0]),
        projection: Projection::None,
    };
    let series = energy_drift_series(&exact, &sys, &spec).unwrap();
    assert_eq!(series[0].drift, 0.0);
    assert!(max_relative_drift(&series) < 1e-13);
}

#[test]
fn scaled_flow_gives_forced_averages() {
    let sys = SystemSpec::sho();
    let domain = BoxDomain::cube(2, 1.2);
    let setup = sho_setup(&sys, &domain);
    let m = ScaledShoFlow { gain: 1.1 };
    let e = avg_relative_error(&m, &setup, 1).unwrap();
    assert!((e.mean - 0.1).abs() < 1e-9, "{}", e.mean);
    let v = avg_energy_variation(&m, &setup, 1).unwrap();
    assert!((v.mean - 0.21).abs() < 1e-12, "{}", v.mean);
    // Two windows compound the gain.
    let v2 = avg_energy_variation(&m, &setup, 2).unwrap();
    assert!((v2.mean - (1.1f64.powi(4) - 1.0)).abs() < 1e-12);
}

#[test]
fn metrics_match_independent_resummation() {
    let sys = SystemSpec::sho();
    let domain = BoxDomain::cube(2, 1.2);
    let setup = sho_setup(&sys, &domain);
    let m = SympFlowModel::random(1, 10, 3, &mut rng(7));
    let xs = metric_points(&sys, &domain, 20, 4).unwrap();
    let (mut err, mut var) = (0.0, 0.0);
    for x in &xs {
        let mut y = x.clone();
        for _ in 0..3 {
            y = m.forward(1.0, &y).unwrap();
        }
        let exact = sys.analytic_solution(x, 3.0).unwrap();
        let d: f64 = y.as_slice().iter().zip(exact.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
        let n: f64 = exact.as_slice().iter().map(|a| a * a).sum();
        err += d.sqrt() / n.sqrt();
        let h0 = 0.5 * (x.as_slice()[0].powi(2) + x.as_slice()[1].powi(2));
        let h = 0.5 * (y.as_slice()[0].powi(2) + y.as_slice()[1].powi(2));
        var += (h - h0).abs() / h0;
    }
    let got = avg_relative_error(&m, &setup, 3).unwrap().mean;
    assert!((got - err / 20.0).abs() < 1e-8 * (1.0 + got));
    let got = avg_energy_variation(&m, &setup, 3).unwrap().mean;
    assert!((got - var / 20.0).abs() < 1e-13 * (1.0 + got));
}

#[test]
fn metrics_are_deterministic_across_modes() {
    let sys = SystemSpec::HenonHeiles;
    let domain = BoxDomain::cube(4, 1.0);
    let m = SympFlowModel::random(2, 10, 2, &mut rng(8));
    let mut setup = MetricSetup {
        sys: &sys,
        domain: &domain,
        samples: 40,
        dt: 1.0,
        seed: 11,
        execution: Execution::Sequential,
    };
    let a = avg_relative_error(&m, &setup, 2).unwrap();
    setup.execution = Execution::Parallel;
    let b = avg_relative_error(&m, &setup, 2).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn zero_energy_samples_are_skipped() {
    let sys = SystemSpec::Null { d: 1 };
    let domain = BoxDomain::cube(2, 1.0);
    let setup = MetricSetup {
        sys: &sys,
        domain: &domain,
        samples: 5,
        dt: 1.0,
        seed: 0,
        execution: Execution::Sequential,
    };
    let v = avg_energy_variation(&SympFlowModel::zeros(1, 10, 1), &setup, 1).unwrap();
    assert_eq!((v.used, v.skipped), (0, 5));
    assert!(v.mean.is_nan());
}

#[test]
fn drift_series_pointwise() {
    let sys = SystemSpec::sho();
    let m = SympFlowModel::random(1, 10, 2, &mut rng(9));
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 5.0,
        step: 0.5,
        x0: pt(&[1.0, 0.0]),
        projection: Projection::None,
    };
    let series = energy_drift_series(&m, &sys, &spec).unwrap();
    assert_eq!(series[0].drift, 0.0);
    for p in &series {
        let y = rollout(&m, 1.0, p.t, &spec.x0).unwrap();
        assert_eq!(p.drift, sys.hamiltonian(&y).unwrap() - 0.5);
        assert_eq!(p.relative, p.drift / 0.5);
        if p.t > 0.0 {
            assert_eq!(p.per_time, p.drift / p.t);
        }
    }
}

fn slope_of(f: impl Fn(f64) -> f64) -> f64 {
    let series: Vec<(f64, f64)> = (1..=1000).map(|i| (i as f64, f(i as f64))).collect();
    drift_slope(&series, 10.0).unwrap()
}

#[test]
fn drift_slope_on_constructed_series() {
    assert!((slope_of(|t| 3e-4 * t) - 1.0).abs() < 0.01);
    assert!(slope_of(|_| 2e-3).abs() < 0.01);
    assert!((slope_of(|t| -1e-6 * t * t) - 2.0).abs() < 0.01);
}

#[test]
fn drift_slope_ignores_early_and_tiny_points() {
    let mut series: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, i as f64)).collect();
    series[0].1 = 1e6;
    series[50].1 = 0.0;
    assert!((drift_slope(&series, 10.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(drift_slope(&[(20.0, 1.0)], 10.0).is_err());
}

#[test]
fn section_of_path_without_crossings_is_empty() {
    let path: Vec<(f64, PhasePoint)> = (0..100)
        .map(|i| (i as f64 * 0.1, pt(&[0.1, 0.2, 0.3, 0.4])))
        .collect();
    assert!(poincare_section(&path).is_empty());
}

#[test]
fn section_of_synthetic_sine_path() {
    let path: Vec<(f64, PhasePoint)> = (0..=3000)
        .map(|i| {
            let t = i as f64 * 0.01 - 0.5;
            (t, pt(&[t.sin(), 0.25, t.cos(), -0.75]))
        })
        .collect();
    let sec = poincare_section(&path);
    assert_eq!(sec.len(), 5);
    for (k, s) in sec.iter().enumerate() {
        assert!((s.t - 2.0 * PI * k as f64).abs() < 1e-5, "{}", s.t);
        assert_eq!((s.q_y, s.p_y), (0.25, -0.75));
        assert_eq!(s.state.as_slice()[0], 0.0);
    }
}

#[test]
fn refined_section_lands_on_the_plane() {
    let path: Vec<(f64, PhasePoint)> = (0..=200)
        .map(|i| {
            let t = i as f64 * 0.1 + 0.05;
            (t, pt(&[t.sin(), t, t.cos(), 0.0]))
        })
        .collect();
    let exact = |t: f64| Ok(pt(&[t.sin(), t, t.cos(), 0.0]));
    let sec = poincare_section_refined(&path, exact, 1e-14).unwrap();
    assert_eq!(sec.len(), 3);
    for (k, s) in sec.iter().enumerate() {
        assert!((s.t - 2.0 * PI * (k + 1) as f64).abs() < 1e-12);
        assert!((s.q_y - s.t).abs() < 1e-12);
    }
}

#[test]
fn reference_section_conserves_energy() {
    let sys = SystemSpec::HenonHeiles;
    let x0 = pt(&[0.3, -0.3, 0.3, 0.0]);
    let h0 = sys.hamiltonian(&x0).unwrap();
    let sec = reference_section(&sys, &x0, 100.0, 0.01).unwrap();
    assert!(sec.len() > 5);
    for s in &sec {
        assert!((sys.hamiltonian(&s.state).unwrap() - h0).abs() < 1e-6);
    }
}

#[test]
fn model_section_points_are_on_the_rollout() {
    let m = SympFlowModel::random(2, 10, 2, &mut rng(12));
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 30.0,
        step: 0.01,
        x0: pt(&[0.3, -0.3, 0.3, 0.0]),
        projection: Projection::None,
    };
    let coarse = poincare_section(&rollout_path(&m, &spec).unwrap());
    let fine = model_section(&m, &spec).unwrap();
    assert_eq!(coarse.len(), fine.len());
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a.t - b.t).abs() < 0.01);
        let y = rollout(&m, 1.0, b.t, &spec.x0).unwrap();
        assert!(y.as_slice()[0].abs() < 1e-12);
        assert_eq!(y.as_slice()[1], b.q_y);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let s: AnyModel = SympFlowModel::random(2, 10, 3, &mut rng(13)).into();
    let m: AnyModel = MlpFlowModel::random(1, 5, &mut rng(14)).into();
    for (name, model) in [("s.json", &s), ("m.json", &m)] {
        let path = dir.path().join(name);
        save_checkpoint(model, 77, &path).unwrap();
        let back = super::checkpoint::load_checkpoint(&path).unwrap();
        assert_eq!(back.seed, 77);
        assert_eq!(&back.model, model);
        let bits = |m: &AnyModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.model), bits(model));
    }
    assert!(load_sympflow(&dir.path().join("s.json")).is_ok());
    assert!(load_mlp(&dir.path().join("m.json")).is_ok());
}

#[test]
fn checkpoint_errors() {
    let dir = tempfile::tempdir().unwrap();
    let s: AnyModel = SympFlowModel::random(1, 10, 1, &mut rng(15)).into();
    let path = dir.path().join("s.json");
    save_checkpoint(&s, 0, &path).unwrap();
    assert!(matches!(load_mlp(&path), Err(Error::KindMismatch { .. })));

    let text = to_json(&s, 0).unwrap().replace("sympflow-ckpt-v1", "sympflow-ckpt-v0");
    assert!(matches!(from_json(&text), Err(Error::Format(_))));
    let text = to_json(&s, 0).unwrap().replace("\"L\": 1", "\"L\": 2");
    assert!(from_json(&text).is_err());
    assert!(matches!(from_json("{}"), Err(Error::Format(_))));
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec {
        trajectories: 4,
        samples_per_trajectory: 3,
        dt: 1.0,
        noise_std: 0.01,
        seed: 5,
    };
    let data = generate_dataset(&SystemSpec::HenonHeiles, &BoxDomain::cube(4, 1.0), &spec, Execution::Sequential).unwrap();
    write_dataset(&data, dir.path()).unwrap();
    let head = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert!(head.starts_with("traj_id,t,y_1,y_2,y_3,y_4\n"));
    let ics = std::fs::read_to_string(dir.path().join("ics.csv")).unwrap();
    assert!(ics.starts_with("traj_id,x_1,x_2,x_3,x_4\n"));
    assert_eq!(read_dataset(dir.path()).unwrap(), data);
}

#[test]
fn path_csv_round_trip() {
    let path = vec![(0.0, pt(&[1.0, 0.0])), (0.1, pt(&[0.1 + 0.2, -1.0 / 3.0]))];
    assert_eq!(read_path_csv(&path_csv(&path)).unwrap(), path);
}

/// Exact damped motion embedded in the physical limit.
#[derive(Clone)]
struct ExactDamped {
    sys: SystemSpec,
}

impl FlowMap for ExactDamped {
    fn half_dim(&self) -> usize {
        2
    }
    fn kind(&self) -> ModelKind {
        ModelKind::SympFlow
    }
    fn params(&self) -> &[f64] {
        &[]
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }
    fn flow<T: Real>(&self, _w: &[T], _t: T, _x: &[T]) -> Vec<T> {
        unreachable!("stand-in only supports forward")
    }
    fn forward(&self, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
        let y = self.sys.analytic_solution(&crate::systems::physical_state(x)?, t)?;
        Ok(crate::systems::embed_physical(y.as_slice()[0], y.as_slice()[1]))
    }
}

#[test]
fn damped_l2_error_of_exact_motion_is_zero() {
    let sys = SystemSpec::damped(0.5);
    let spec = RolloutSpec {
        dt: 1.0,
        horizon: 10.0,
        step: 0.1,
        x0: crate::systems::embed_physical(1.0, 0.0),
        projection: Projection::PhysicalLimit,
    };
    let exact = ExactDamped { sys: sys.clone() };
    assert!(damped_l2_error(&exact, &sys, &spec).unwrap() < 1e-12);
    // An identity model stays at x0, so the error is the RMS of the motion's
    // distance from its start.
    let idle = SympFlowModel::zeros(2, 10, 1);
    let x0 = pt(&[1.0, 0.0]);
    let n = spec.times().len() as f64;
    let rms = (spec
        .times()
        .iter()
        .map(|&t| sys.analytic_solution(&x0, t).unwrap().distance(&x0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    assert!((damped_l2_error(&idle, &sys, &spec).unwrap() - rms).abs() < 1e-14);
    assert!(damped_l2_error(&idle, &SystemSpec::HenonHeiles, &spec).is_err());
}
