//! The exact time-dependent Hamiltonian generating a SympFlow.
//!
//! Layer pair `i` (`φ_p^i ∘ φ_q^i`) is generated by
//! `H^i_t(q, p) = ∂_t V_p^i(t, p) + ∂_t V_q^i(t, q - (∇V_p^i(t,p) - ∇V_p^i(0,p)))`.
//! Composing flows adds Hamiltonians after pulling each back through the
//! inverse of everything applied after it, so for the whole model
//!
//! `ℋ(ψ̄)(t, x) = Σ_i H^i_t( (pairs i+1..L)^{-1} (x) )`.
//!
//! Pairs are indexed from 0 here.

use crate::ad::{Dual, Real};
use crate::diffcore::potential_input_grad;
use crate::error::{check_dim, Error, Result};
use crate::flow::{FlowMap, PhasePoint};
use crate::model::{Shear, SympFlowModel};

fn check(model: &SympFlowModel, t: f64, x: &PhasePoint) -> Result<()> {
    check_dim("phase half-dimension", model.d(), x.d())?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite time {t}")));
    }
    Ok(())
}


/// Hamiltonian of pair `layer` at `x`; also returns `φ_pair^{-1}(x)` since
/// it shares every gradient evaluation.
fn pair_step<T: Real>(model: &SympFlowModel, w: &[T], layer: usize, t: T, x: &[T]) -> (T, Vec<T>) {
    let shape = model.net_shape();
    let d = shape.d;
    let wq = model.net_params(w, layer, Shear::Q);
    let wp = model.net_params(w, layer, Shear::P);
    let (q, p) = x.split_at(d);

    let gp_now = potential_input_grad(shape, wp, t, p);
    let gp_start = potential_input_grad(shape, wp, T::zero(), p).dq;
    let q_in: Vec<T> = q
        .iter()
        .zip(gp_now.dq.iter().zip(&gp_start))
        .map(|(&qi, (&a, &b))| qi - (a - b))
        .collect();

    let gq_now = potential_input_grad(shape, wq, t, &q_in);
    let gq_start = potential_input_grad(shape, wq, T::zero(), &q_in).dq;
    let energy = gp_now.dt + gq_now.dt;

    let mut back = q_in;
    back.extend(
        p.iter()
            .zip(gq_now.dq.iter().zip(&gq_start))
            .map(|(&pi, (&a, &b))| pi + (a - b)),
    );
    (energy, back)
}

/// `ℋ(ψ̄)(t, x)` with generic parameters.
pub(crate) fn extract_with<T: Real>(model: &SympFlowModel, w: &[T], t: T, x: &[T]) -> T {
    let mut y = x.to_vec();
    let mut terms = Vec::with_capacity(model.layers());
    for layer in (0..model.layers()).rev() {
        let (h, back) = pair_step(model, w, layer, t, &y);
        terms.push(h);
        y = back;
    }
    T::sum(&terms)
}

/// `H^i_t(x)` for pair `layer` (0-based).
pub fn pair_hamiltonian(model: &SympFlowModel, layer: usize, t: f64, x: &PhasePoint) -> Result<f64> {
    check(model, t, x)?;
    if layer >= model.layers() {
        return Err(Error::LayerIndex {
            index: layer,
            max: model.layers() - 1,
        });
    }
    Ok(pair_step(model, model.params(), layer, t, x.as_slice()).0)
}

/// Inverse of the composition of pairs `from..L` at time `t`;
/// `from == L` is the empty composition.
pub fn tail_inverse(model: &SympFlowModel, from: usize, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
    check(model, t, x)?;
    if from > model.layers() {
        return Err(Error::LayerIndex {
            index: from,
            max: model.layers(),
        });
    }
    let mut y = x.as_slice().to_vec();
    for layer in (from..model.layers()).rev() {
        model.invert_pair(model.params(), layer, t, &mut y);
    }
    Ok(PhasePoint::raw(y))
}

/// `ℋ(ψ̄)(t, x)`, the representative with no added function of time.
pub fn extract(model: &SympFlowModel, t: f64, x: &PhasePoint) -> Result<f64> {
    check(model, t, x)?;
    Ok(extract_with(model, model.params(), t, x.as_slice()))
}

/// `∇_x ℋ(ψ̄)(t, x)`, one forward-mode pass per coordinate.
pub fn extract_gradient(model: &SympFlowModel, t: f64, x: &PhasePoint) -> Result<Vec<f64>> {
    check(model, t, x)?;
    let n = x.as_slice().len();
    let w: Vec<Dual<f64>> = Dual::constants(model.params());
    Ok((0..n)
        .map(|j| {
            let mut seed = vec![0.0; n];
            seed[j] = 1.0;
            let xd = Dual::seed(x.as_slice(), &seed);
            extract_with(model, &w, Dual::constant(t), &xd).eps
        })
        .collect())
}

/// `ℋ(ψ̄)(t - Δt⌊t/Δt⌋, x)`: the Hamiltonian of the periodic rollout.
pub fn piecewise_hamiltonian(model: &SympFlowModel, window: f64, t: f64, x: &PhasePoint) -> Result<f64> {
    let (_, rem) = split_time(window, t)?;
    extract(model, rem, x)
}

/// `(⌊t/Δt⌋, t - Δt⌊t/Δt⌋)`, with the remainder clamped into `[0, Δt)`.
pub fn split_time(window: f64, t: f64) -> Result<(u64, f64)> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(Error::InvalidArgument(format!("window must be positive, got {window}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let k = (t / window).floor();
    let rem = (t - window * k).max(0.0);
    if rem >= window {
        return Ok((k as u64 + 1, 0.0));
    }
    Ok((k as u64, rem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::apply_j;
    use crate::model::{invert_p_layer, invert_q_layer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(d: usize, layers: usize, seed: u64) -> SympFlowModel {
        SympFlowModel::random(d, 10, layers, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn pt(v: &[f64]) -> PhasePoint {
        PhasePoint::from_vec(v.to_vec()).unwrap()
    }

    /// Pair Hamiltonian assembled from the public potential API.
    fn pair_oracle(m: &SympFlowModel, layer: usize, t: f64, x: &PhasePoint) -> f64 {
        let (vq, vp) = (m.q_net(layer), m.p_net(layer));
        let (q, p) = (x.q(), x.p());
        let shift: Vec<f64> = vp
            .grad_input(t, p)
            .unwrap()
            .iter()
            .zip(vp.grad_input(0.0, p).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        let q_in: Vec<f64> = q.iter().zip(&shift).map(|(a, b)| a - b).collect();
        vp.time_partial(t, p).unwrap() + vq.time_partial(t, &q_in).unwrap()
    }

    /// The literal recursion `H^{L:i} = H^{L:i+1} + H^i ∘ (φ_{H^{L:i+1}})^{-1}`,
    /// where the inverse flow of the partial Hamiltonian is the inverse of the
    /// layer composition it generates.
    fn recursion_oracle(m: &SympFlowModel, t: f64, x: &PhasePoint) -> f64 {
        fn h_tail(m: &SympFlowModel, i: usize, t: f64, x: &PhasePoint) -> f64 {
            let l = m.layers();
            if i == l - 1 {
                return pair_oracle(m, i, t, x);
            }
            let mut y = x.clone();
            for k in (i + 1..l).rev() {
                y = invert_p_layer(&m.p_net(k), t, &y).unwrap();
                y = invert_q_layer(&m.q_net(k), t, &y).unwrap();
            }
            h_tail(m, i + 1, t, x) + pair_oracle(m, i, t, &y)
        }
        h_tail(m, 0, t, x)
    }

    #[test]
    fn zero_model_has_zero_hamiltonian() {
        let m = SympFlowModel::zeros(1, 10, 3);
        let x = pt(&[0.3, -0.2]);
        assert_eq!(extract(&m, 0.4, &x).unwrap(), 0.0);
        assert_eq!(pair_hamiltonian(&m, 1, 0.4, &x).unwrap(), 0.0);
        assert_eq!(extract_gradient(&m, 0.4, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pair_hamiltonian_matches_primitive_assembly() {
        let m = model(2, 2, 1);
        let x = pt(&[0.3, -0.2, 0.5, 0.9]);
        for layer in 0..2 {
            let got = pair_hamiltonian(&m, layer, 0.65, &x).unwrap();
            assert!((got - pair_oracle(&m, layer, 0.65, &x)).abs() < 1e-13);
        }
        assert!(matches!(
            pair_hamiltonian(&m, 2, 0.1, &x),
            Err(Error::LayerIndex { .. })
        ));
    }

    #[test]
    fn pair_hamiltonian_without_p_net_is_q_time_partial() {
        let mut m = model(1, 1, 2);
        m.net_params_mut(0, Shear::P).iter_mut().for_each(|w| *w = 0.0);
        let x = pt(&[0.4, 0.1]);
        let got = pair_hamiltonian(&m, 0, 0.3, &x).unwrap();
        assert_eq!(got, m.q_net(0).time_partial(0.3, &[0.4]).unwrap());
    }

    #[test]
    fn tail_inverse_cases() {
        let m = model(1, 2, 3);
        let x = pt(&[0.7, -0.3]);
        assert_eq!(tail_inverse(&m, 2, 0.5, &x).unwrap(), x);
        let y = m.forward(0.5, &x).unwrap();
        assert!(tail_inverse(&m, 0, 0.5, &y).unwrap().distance(&x) < 1e-10);
        let manual = invert_q_layer(
            &m.q_net(1),
            0.5,
            &invert_p_layer(&m.p_net(1), 0.5, &x).unwrap(),
        )
        .unwrap();
        assert_eq!(tail_inverse(&m, 1, 0.5, &x).unwrap(), manual);
        assert!(tail_inverse(&m, 3, 0.5, &x).is_err());
    }

    #[test]
    fn single_layer_extract_is_pair_hamiltonian() {
        let m = model(1, 1, 4);
        let x = pt(&[0.2, 0.6]);
        assert_eq!(
            extract(&m, 0.8, &x).unwrap(),
            pair_hamiltonian(&m, 0, 0.8, &x).unwrap()
        );
    }

    #[test]
    fn closed_form_matches_literal_recursion() {
        for (d, seed) in [(1, 5), (2, 6)] {
            let m = model(d, 3, seed);
            let x = PhasePoint::from_vec((0..2 * d).map(|k| 0.3 - 0.2 * k as f64).collect()).unwrap();
            let got = extract(&m, 0.55, &x).unwrap();
            let want = recursion_oracle(&m, 0.55, &x);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn extract_gradient_matches_fd() {
        let m = model(2, 3, 7);
        let x = pt(&[0.3, -0.2, 0.5, 0.1]);
        let g = extract_gradient(&m, 0.4, &x).unwrap();
        let e = 1e-5;
        for k in 0..4 {
            let mut a = x.as_slice().to_vec();
            let mut b = a.clone();
            a[k] += e;
            b[k] -= e;
            let fd = (extract(&m, 0.4, &pt(&a)).unwrap() - extract(&m, 0.4, &pt(&b)).unwrap()) / (2.0 * e);
            assert!((g[k] - fd).abs() <= 1e-5 * g[k].abs().max(fd.abs()) + 1e-8);
        }
    }

    #[test]
    fn velocity_is_hamiltonian_vector_field_of_extract() {
        let m = model(1, 3, 8);
        let x0 = pt(&[0.5, -0.4]);
        let t = 0.6;
        let v = m.time_derivative(t, &x0).unwrap();
        let y = m.forward(t, &x0).unwrap();
        let jg = apply_j(&extract_gradient(&m, t, &y).unwrap());
        for k in 0..2 {
            let a = v.as_slice()[k];
            assert!((a - jg[k]).abs() <= 1e-4 * a.abs().max(jg[k].abs()) + 1e-7);
        }
    }

    #[test]
    fn piecewise_hamiltonian_uses_remainder() {
        let m = model(1, 2, 9);
        let x = pt(&[0.1, 0.2]);
        let h = |t| extract(&m, t, &x).unwrap();
        assert_eq!(piecewise_hamiltonian(&m, 1.0, 3.0, &x).unwrap(), h(0.0));
        assert_eq!(piecewise_hamiltonian(&m, 1.0, 2.5, &x).unwrap(), h(0.5));
        assert_eq!(piecewise_hamiltonian(&m, 1.0, 0.25, &x).unwrap(), h(0.25));
        assert!(piecewise_hamiltonian(&m, 0.0, 1.0, &x).is_err());
        assert!(piecewise_hamiltonian(&m, -1.0, 1.0, &x).is_err());
    }

    #[test]
    fn split_time_arithmetic() {
        assert_eq!(split_time(1.0, 2.5).unwrap(), (2, 0.5));
        assert_eq!(split_time(1.0, 3.0).unwrap(), (3, 0.0));
        assert_eq!(split_time(0.5, 0.2).unwrap(), (0, 0.2));
        assert!(split_time(1.0, -0.1).is_err());
    }
}
