//! Phase-space points and the interface shared by the two flow families.

use serde::{Deserialize, Serialize};

use crate::ad::{Dual, Real};
use crate::error::{check_dim, Error, Result};

/// A point `x = (q, p)` of a `2d`-dimensional phase space, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint(Vec<f64>);

impl PhasePoint {
    pub fn new(q: &[f64], p: &[f64]) -> Result<Self> {
        check_dim("momentum", q.len(), p.len())?;
        let mut v = q.to_vec();
        v.extend_from_slice(p);
        Self::from_vec(v)
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "phase point needs an even positive length, got {}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite phase point".into()));
        }
        Ok(Self(v))
    }

    pub(crate) fn raw(v: Vec<f64>) -> Self {
        debug_assert!(v.len() % 2 == 0);
        Self(v)
    }

    pub fn d(&self) -> usize {
        self.0.len() / 2
    }

    pub fn q(&self) -> &[f64] {
        &self.0[..self.d()]
    }

    pub fn p(&self) -> &[f64] {
        &self.0[self.d()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Which network family a model belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    SympFlow,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::SympFlow => "sympflow",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sympflow" => Ok(ModelKind::SympFlow),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// How `d/dt ψ̄` is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMode {
    /// Forward-mode differentiation through every layer.
    #[default]
    Exact,
    /// Central difference in `t` with step [`FD_TIME_STEP`].
    Fd,
}

pub const FD_TIME_STEP: f64 = 1e-4;

/// A parametrized time-dependent map `ψ̄(t, ·)` on `R^{2d}` with
/// `ψ̄(0, x) = x`.
///
/// Implementors write [`FlowMap::flow`] once, generically; evaluation,
/// time derivatives, Jacobians and parameter gradients all derive from it.
pub trait FlowMap: Clone + Send + Sync {
    /// Phase half-dimension `d`.
    fn half_dim(&self) -> usize;

    fn kind(&self) -> ModelKind;

    /// Flat parameters.
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// `ψ̄(t, x)` with externally supplied parameters `w`.
    fn flow<T: Real>(&self, w: &[T], t: T, x: &[T]) -> Vec<T>;

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn check_point(&self, t: f64, x: &PhasePoint) -> Result<()> {
        check_dim("phase half-dimension", self.half_dim(), x.d())?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite time {t}")));
        }
        Ok(())
    }

    fn forward(&self, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
        self.check_point(t, x)?;
        Ok(PhasePoint::raw(self.flow(self.params(), t, x.as_slice())))
    }

    /// `(ψ̄(t, x), d/dt ψ̄(t, x))` with generic parameters.
    fn state_and_velocity<T: Real>(
        &self,
        w: &[T],
        t: T,
        x: &[T],
        mode: DerivativeMode,
    ) -> (Vec<T>, Vec<T>) {
        match mode {
            DerivativeMode::Exact => {
                let wd: Vec<Dual<T>> = Dual::constants(w);
                let xd: Vec<Dual<T>> = Dual::constants(x);
                let out = self.flow(&wd, Dual::variable(t), &xd);
                Dual::split(&out)
            }
            DerivativeMode::Fd => {
                let h = FD_TIME_STEP;
                let state = self.flow(w, t, x);
                let plus = self.flow(w, t + T::from_f64(h), x);
                let minus = self.flow(w, t - T::from_f64(h), x);
                let vel = plus
                    .into_iter()
                    .zip(minus)
                    .map(|(a, b)| (a - b).scale(0.5 / h))
                    .collect();
                (state, vel)
            }
        }
    }

    /// Exact `d/dt ψ̄(t, x)`.
    fn time_derivative(&self, t: f64, x: &PhasePoint) -> Result<PhasePoint> {
        self.check_point(t, x)?;
        let (_, v) = self.state_and_velocity(self.params(), t, x.as_slice(), DerivativeMode::Exact);
        Ok(PhasePoint::raw(v))
    }

    /// Exact Jacobian `Dψ̄_t(x)` (row-major `2d × 2d`), one tangent
    /// propagation per basis direction.
    fn jacobian(&self, t: f64, x: &PhasePoint) -> Result<Vec<Vec<f64>>> {
        self.check_point(t, x)?;
        let n = 2 * self.half_dim();
        let w: Vec<Dual<f64>> = Dual::constants(self.params());
        let mut jac = vec![vec![0.0; n]; n];
        for (j, _) in (0..n).enumerate() {
            let mut seed = vec![0.0; n];
            seed[j] = 1.0;
            let xd = Dual::seed(x.as_slice(), &seed);
            let out = self.flow(&w, Dual::constant(t), &xd);
            for (i, o) in out.iter().enumerate() {
                jac[i][j] = o.eps;
            }
        }
        Ok(jac)
    }
}

/// The canonical symplectic matrix `Ω = [[0, I], [-I, 0]]`.
pub fn canonical_omega(d: usize) -> Vec<Vec<f64>> {
    let n = 2 * d;
    let mut om = vec![vec![0.0; n]; n];
    for i in 0..d {
        om[i][d + i] = 1.0;
        om[d + i][i] = -1.0;
    }
    om
}

/// `max |Jᵀ Ω J - Ω|` entrywise.
pub fn symplectic_defect(jac: &[Vec<f64>]) -> f64 {
    let n = jac.len();
    let om = canonical_omega(n / 2);
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += jac[i][a] * om[i][j] * jac[j][b];
                }
            }
            worst = worst.max((s - om[a][b]).abs());
        }
    }
    worst
}

/// `J v` with `J` the canonical symplectic matrix: `(v_p, -v_q)`.
pub fn apply_j<T: Real>(v: &[T]) -> Vec<T> {
    let d = v.len() / 2;
    let mut out = Vec::with_capacity(v.len());
    out.extend_from_slice(&v[d..]);
    out.extend(v[..d].iter().map(|&x| -x));
    out
}
