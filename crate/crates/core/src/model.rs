//! SympFlow: a composition of exact time-dependent shear flows.
//!
//! A q-layer moves momenta, `p -= ∇_q V(t, q) - ∇_q V(0, q)`, and is the
//! exact flow of the Hamiltonian `∂_t V(t, q)`. A p-layer moves positions,
//! `q += ∇_p V(t, p) - ∇_p V(0, p)`. The model applies
//! `φ_p^L ∘ φ_q^L ∘ … ∘ φ_p^1 ∘ φ_q^1`, so it is symplectic for every
//! parameter value and equals the identity at `t = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::ad::Real;
use crate::diffcore::{init_uniform, potential_input_grad, NetShape, PotentialNet};
use crate::error::{check_dim, Error, Result};
use crate::flow::{FlowMap, ModelKind, PhasePoint};

/// `∇V(t, z) - ∇V(0, z)`.
pub(crate) fn shear_shift<T: Real>(
    shape: NetShape,
    w: &[T],
    t: T,
    z: &[T],
) -> SmallVec<[T; 4]> {
    let now = potential_input_grad(shape, w, t, z).dq;
    let start = potential_input_grad(shape, w, T::zero(), z).dq;
    now.into_iter().zip(start).map(|(a, b)| a - b).collect()
}

/// Which half of the state a shear layer moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shear {
    /// Potential in `q`; updates `p`.
    Q,
    /// Potential in `p`; updates `q`.
    P,
}

/// Apply (`sign = +1`) or invert (`sign = -1`) one shear layer in place.
pub(crate) fn shear_in_place<T: Real>(
    shape: NetShape,
    w: &[T],
    kind: Shear,
    t: T,
    x: &mut [T],
    sign: f64,
) {
    let d = shape.d;
    let (fixed, moving) = x.split_at_mut(d);
    match kind {
        Shear::Q => {
            let s = shear_shift(shape, w, t, fixed);
            for (p, ds) in moving.iter_mut().zip(s) {
                *p = *p - ds.scale(sign);
            }
        }
        Shear::P => {
            let s = shear_shift(shape, w, t, moving);
            for (q, ds) in fixed.iter_mut().zip(s) {
                *q = *q + ds.scale(sign);
            }
        }
    }
}

fn layer_op(net: &PotentialNet, kind: Shear, t: f64, x: &PhasePoint, sign: f64) -> Result<PhasePoint> {
    check_dim("shear layer state", net.d(), x.d())?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite time {t}")));
    }
    let mut v = x.as_slice().to_vec();
    shear_in_place(net.shape(), net.params().as_slice(), kind, t, &mut v, sign);
    Ok(PhasePoint::raw(v))
}

/// `(q, p - (∇_q V(t,q) - ∇_q V(0,q)))`.
pub fn apply_q_layer(net: &PotentialNet, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
    layer_op(net, Shear::Q, t, x, 1.0)
}

/// `(q + (∇_p V(t,p) - ∇_p V(0,p)), p)`.
pub fn apply_p_layer(net: &PotentialNet, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
    layer_op(net, Shear::P, t, x, 1.0)
}

pub fn invert_q_layer(net: &PotentialNet, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
    layer_op(net, Shear::Q, t, x, -1.0)
}

pub fn invert_p_layer(net: &PotentialNet, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
    layer_op(net, Shear::P, t, x, -1.0)
}

/// A SympFlow with `layers` pairs of potentials of hidden width `h`.
///
/// Parameters are stored flat, nets ordered `(Vq_1, Vp_1, …, Vq_L, Vp_L)`,
/// each net in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SympFlowModel {
    d: usize,
    h: usize,
    layers: usize,
    params: Vec<f64>,
}

impl SympFlowModel {
    pub fn zeros(d: usize, h: usize, layers: usize) -> Self {
        assert!(layers > 0, "a SympFlow needs at least one layer");
        let n = 2 * layers * NetShape::new(d, h).param_count();
        Self {
            d,
            h,
            layers,
            params: vec![0.0; n],
        }
    }

    pub fn random<R: Rng + ?Sized>(d: usize, h: usize, layers: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(d, h, layers);
        let shape = m.net_shape();
        let per = shape.param_count();
        for chunk in m.params.chunks_mut(per) {
            init_uniform(shape, chunk, rng);
        }
        m
    }

    pub fn from_params(d: usize, h: usize, layers: usize, params: Vec<f64>) -> Result<Self> {
        if d == 0 || h == 0 || layers == 0 {
            return Err(Error::InvalidArgument("d, h and L must be positive".into()));
        }
        let mut m = Self::zeros(d, h, layers);
        check_dim("sympflow parameters", m.params.len(), params.len())?;
        m.params = params;
        Ok(m)
    }

    /// Assemble from explicit `(Vq_i, Vp_i)` pairs.
    pub fn from_nets(pairs: &[(PotentialNet, PotentialNet)]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty layer list".into()))?;
        let shape = first.0.shape();
        let mut params = Vec::with_capacity(2 * pairs.len() * shape.param_count());
        for (q, p) in pairs {
            if q.shape() != shape || p.shape() != shape {
                return Err(Error::InvalidArgument("all potentials must share d and h".into()));
            }
            params.extend_from_slice(q.params().as_slice());
            params.extend_from_slice(p.params().as_slice());
        }
        Self::from_params(shape.d, shape.h, pairs.len(), params)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn net_shape(&self) -> NetShape {
        NetShape::new(self.d, self.h)
    }

    pub(crate) fn net_range(&self, layer: usize, kind: Shear) -> std::ops::Range<usize> {
        let per = self.net_shape().param_count();
        let k = 2 * layer + if kind == Shear::P { 1 } else { 0 };
        k * per..(k + 1) * per
    }

    pub(crate) fn net_params<'a, T>(&self, w: &'a [T], layer: usize, kind: Shear) -> &'a [T] {
        &w[self.net_range(layer, kind)]
    }

    fn net(&self, layer: usize, kind: Shear) -> PotentialNet {
        assert!(layer < self.layers, "layer {layer} out of range");
        PotentialNet::from_params(self.d, self.h, self.params[self.net_range(layer, kind)].to_vec())
            .expect("shape is consistent by construction")
    }

    /// `Vq` of layer `layer` (0-based).
    pub fn q_net(&self, layer: usize) -> PotentialNet {
        self.net(layer, Shear::Q)
    }

    /// `Vp` of layer `layer` (0-based).
    pub fn p_net(&self, layer: usize) -> PotentialNet {
        self.net(layer, Shear::P)
    }

    pub fn net_params_mut(&mut self, layer: usize, kind: Shear) -> &mut [f64] {
        let r = self.net_range(layer, kind);
        &mut self.params[r]
    }

    /// Apply layer pair `layer`, `φ_p ∘ φ_q`, in place.
    pub(crate) fn apply_pair<T: Real>(&self, w: &[T], layer: usize, t: T, x: &mut [T]) {
        let shape = self.net_shape();
        shear_in_place(shape, self.net_params(w, layer, Shear::Q), Shear::Q, t, x, 1.0);
        shear_in_place(shape, self.net_params(w, layer, Shear::P), Shear::P, t, x, 1.0);
    }

    /// Invert layer pair `layer`, `φ_q^{-1} ∘ φ_p^{-1}`, in place.
    pub(crate) fn invert_pair<T: Real>(&self, w: &[T], layer: usize, t: T, x: &mut [T]) {
        let shape = self.net_shape();
        shear_in_place(shape, self.net_params(w, layer, Shear::P), Shear::P, t, x, -1.0);
        shear_in_place(shape, self.net_params(w, layer, Shear::Q), Shear::Q, t, x, -1.0);
    }
}

impl FlowMap for SympFlowModel {
    fn half_dim(&self) -> usize {
        self.d
    }

    fn kind(&self) -> ModelKind {
        ModelKind::SympFlow
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn flow<T: Real>(&self, w: &[T], t: T, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        for layer in 0..self.layers {
            self.apply_pair(w, layer, t, &mut y);
        }
        y
    }

    fn forward(&self, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
        self.check_point(t, x)?;
        if t == 0.0 {
            // every shift is ∇V(0,·) - ∇V(0,·); return the input bit for bit
            return Ok(x.clone());
        }
        Ok(PhasePoint::raw(self.flow(&self.params, t, x.as_slice())))
    }
}
