//! Unconstrained baseline `ψ̄(t, x) = x + tanh(t) · MLP([x; t])`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Real;
use crate::error::{check_dim, Error, Result};
use crate::flow::{FlowMap, ModelKind};

pub const MLP_HIDDEN: usize = 10;

/// Layer widths `c_1 = 2d+1, c_2..c_L = 10, c_{L+1} = 2d`; `tanh` between
/// layers, none after the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpFlowModel {
    d: usize,
    layers: usize,
    params: Vec<f64>,
}

fn widths(d: usize, layers: usize) -> Vec<usize> {
    let mut w = vec![2 * d + 1];
    w.extend(std::iter::repeat(MLP_HIDDEN).take(layers - 1));
    w.push(2 * d);
    w
}

impl MlpFlowModel {
    pub fn zeros(d: usize, layers: usize) -> Self {
        assert!(d > 0 && layers > 0, "MLP dimensions must be positive");
        let n = widths(d, layers)
            .windows(2)
            .map(|c| c[1] * c[0] + c[1])
            .sum();
        Self {
            d,
            layers,
            params: vec![0.0; n],
        }
    }

    /// Same scheme as the potentials: uniform in `±1/sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(d: usize, layers: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(d, layers);
        let mut off = 0;
        for c in widths(d, layers).windows(2) {
            let n = c[1] * c[0] + c[1];
            let bound = (1.0 / c[0] as f64).sqrt();
            for p in &mut m.params[off..off + n] {
                *p = rng.random_range(-bound..=bound);
            }
            off += n;
        }
        m
    }

    pub fn from_params(d: usize, layers: usize, params: Vec<f64>) -> Result<Self> {
        if d == 0 || layers == 0 {
            return Err(Error::InvalidArgument("d and L must be positive".into()));
        }
        let mut m = Self::zeros(d, layers);
        check_dim("mlp parameters", m.params.len(), params.len())?;
        m.params = params;
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        widths(self.d, self.layers)
    }

    /// The inner network `φ_L ∘ … ∘ φ_1 ([x; t])` without the `x + tanh(t)·`
    /// wrapper.
    pub(crate) fn inner<T: Real>(&self, w: &[T], t: T, x: &[T]) -> Vec<T> {
        let mut z: Vec<T> = x.to_vec();
        z.push(t);
        let ws = self.widths();
        let mut off = 0;
        for (k, c) in ws.windows(2).enumerate() {
            let (cin, cout) = (c[0], c[1]);
            let a = &w[off..off + cout * cin];
            let b = &w[off + cout * cin..off + cout * cin + cout];
            off += cout * cin + cout;
            let last = k + 2 == ws.len();
            z = (0..cout)
                .map(|i| {
                    let s = T::dot(&a[i * cin..(i + 1) * cin], &z) + b[i];
                    if last {
                        s
                    } else {
                        s.tanh()
                    }
                })
                .collect();
        }
        z
    }
}

impl FlowMap for MlpFlowModel {
    fn half_dim(&self) -> usize {
        self.d
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Mlp
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn flow<T: Real>(&self, w: &[T], t: T, x: &[T]) -> Vec<T> {
        let gate = t.tanh();
        let out = self.inner(w, t, x);
        x.iter().zip(out).map(|(&xi, o)| xi + gate * o).collect()
    }
}
