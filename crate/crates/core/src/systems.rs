//! Benchmark Hamiltonian systems.
//!
//! Variable orderings: `(q, p)` for the oscillator, `(q_x, q_y, p_x, p_y)`
//! for Hénon–Heiles and `(q_a, q_b, π_a, π_b)` for the damped oscillator in
//! its doubled (augmented) phase space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Real;
use crate::error::{check_dim, Error, Result};
use crate::flow::{apply_j, PhasePoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SystemSpec {
    /// `H = p²/2m + k q²/2`.
    Sho { m: f64, k: f64 },
    /// `H = (p_x² + p_y²)/2 + (q_x² + q_y²)/2 + q_x² q_y - q_y³/3`.
    HenonHeiles,
    /// Damped oscillator `m q̈ + λ q̇ + k q = 0` lifted to a conservative
    /// system on `(q_a, q_b, π_a, π_b)`.
    DampedAugmented { m: f64, k: f64, lambda: f64 },
    /// `H ≡ 0` on `R^{2d}`; every point is an equilibrium.
    Null { d: usize },
}

impl SystemSpec {
    pub fn sho() -> Self {
        SystemSpec::Sho { m: 1.0, k: 1.0 }
    }

    pub fn damped(lambda: f64) -> Self {
        SystemSpec::DampedAugmented {
            m: 1.0,
            k: 1.0,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        match *self {
            SystemSpec::Sho { m, k } if !(m > 0.0 && k > 0.0) => bad("SHO needs m > 0 and k > 0"),
            SystemSpec::DampedAugmented { m, k, lambda } if !(m > 0.0 && k > 0.0 && lambda >= 0.0) => {
                bad("damped oscillator needs m > 0, k > 0, lambda >= 0")
            }
            SystemSpec::Null { d: 0 } => bad("null system needs d > 0"),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Sho { .. } => "sho",
            SystemSpec::HenonHeiles => "henon_heiles",
            SystemSpec::DampedAugmented { .. } => "damped_augmented",
            SystemSpec::Null { .. } => "null",
        }
    }

    /// Phase half-dimension `d`.
    pub fn half_dim(&self) -> usize {
        match self {
            SystemSpec::Sho { .. } => 1,
            SystemSpec::HenonHeiles | SystemSpec::DampedAugmented { .. } => 2,
            SystemSpec::Null { d } => *d,
        }
    }

    pub fn is_augmented(&self) -> bool {
        matches!(self, SystemSpec::DampedAugmented { .. })
    }

    pub(crate) fn energy<T: Real>(&self, x: &[T]) -> T {
        let c = T::from_f64;
        match *self {
            SystemSpec::Sho { m, k } => {
                let (q, p) = (x[0], x[1]);
                (p * p).scale(0.5 / m) + (q * q).scale(0.5 * k)
            }
            SystemSpec::HenonHeiles => {
                let (qx, qy, px, py) = (x[0], x[1], x[2], x[3]);
                (px * px + py * py + qx * qx + qy * qy).scale(0.5) + qx * qx * qy
                    - (qy * qy * qy).scale(1.0 / 3.0)
            }
            SystemSpec::DampedAugmented { m, k, lambda } => {
                let (qa, qb, pa, pb) = (x[0], x[1], x[2], x[3]);
                (pa * pa - pb * pb).scale(0.5 / m)
                    + ((qa - qb) * (pa - pb)).scale(lambda / (2.0 * m))
                    + ((qa - qb) * (qa + qb)).scale(0.5 * k)
            }
            SystemSpec::Null { .. } => c(0.0),
        }
    }

    pub(crate) fn field<T: Real>(&self, x: &[T]) -> Vec<T> {
        match *self {
            SystemSpec::Sho { m, k } => vec![x[1].scale(1.0 / m), x[0].scale(-k)],
            SystemSpec::HenonHeiles => {
                let (qx, qy, px, py) = (x[0], x[1], x[2], x[3]);
                vec![
                    px,
                    py,
                    -qx - (qx * qy).scale(2.0),
                    -qy - (qx * qx - qy * qy),
                ]
            }
            SystemSpec::DampedAugmented { m, k, lambda } => {
                let (qa, qb, pa, pb) = (x[0], x[1], x[2], x[3]);
                let g = lambda / (2.0 * m);
                vec![
                    pa.scale(1.0 / m) + (qa - qb).scale(g),
                    pb.scale(-1.0 / m) - (qa - qb).scale(g),
                    (pa - pb).scale(-g) - qa.scale(k),
                    (pa - pb).scale(g) + qb.scale(k),
                ]
            }
            SystemSpec::Null { d } => vec![T::zero(); 2 * d],
        }
    }

    pub fn hamiltonian(&self, x: &PhasePoint) -> Result<f64> {
        check_dim("system half-dimension", self.half_dim(), x.d())?;
        Ok(self.energy(x.as_slice()))
    }

    /// `J ∇H(x)`.
    pub fn vector_field(&self, x: &PhasePoint) -> Result<Vec<f64>> {
        check_dim("system half-dimension", self.half_dim(), x.d())?;
        Ok(self.field(x.as_slice()))
    }

    /// Closed-form solution where one exists: the oscillator, and the
    /// underdamped physical-limit motion of the damped system (`x0` given as
    /// physical `(q, p)`).
    pub fn analytic_solution(&self, x0: &PhasePoint, t: f64) -> Result<PhasePoint> {
        match *self {
            SystemSpec::Sho { m, k } => {
                check_dim("system half-dimension", 1, x0.d())?;
                let w = (k / m).sqrt();
                let (q0, p0) = (x0.q()[0], x0.p()[0]);
                let (s, c) = (w * t).sin_cos();
                let q = q0 * c + p0 / (m * w) * s;
                let qdot = -q0 * w * s + p0 / m * c;
                Ok(PhasePoint::raw(vec![q, m * qdot]))
            }
            SystemSpec::DampedAugmented { m, k, lambda } => {
                check_dim("physical state", 1, x0.d())?;
                let gamma = lambda / (2.0 * m);
                let w0sq = k / m;
                if gamma * gamma >= w0sq {
                    return Err(Error::Unsupported(format!(
                        "closed form covers the underdamped case only (lambda = {lambda})"
                    )));
                }
                let wd = (w0sq - gamma * gamma).sqrt();
                let (q0, v0) = (x0.q()[0], x0.p()[0] / m);
                let b = (v0 + gamma * q0) / wd;
                let (s, c) = (wd * t).sin_cos();
                let decay = (-gamma * t).exp();
                let q = decay * (q0 * c + b * s);
                let qdot = decay * ((b * wd - gamma * q0) * c - (q0 * wd + gamma * b) * s);
                Ok(PhasePoint::raw(vec![q, m * qdot]))
            }
            _ => Err(Error::Unsupported(format!("no closed-form solution for {}", self.name()))),
        }
    }

    /// Draw a point of the training domain. For the augmented system the box
    /// is over physical `(q, p)` and the draw is embedded into the physical
    /// limit; otherwise the box is over the full phase space.
    pub fn sample_domain<R: Rng + ?Sized>(&self, domain: &BoxDomain, rng: &mut R) -> Vec<f64> {
        let raw = domain.sample(rng);
        if self.is_augmented() {
            embed_physical_slice(&raw)
        } else {
            raw
        }
    }

    /// Dimension the domain box must have.
    pub fn domain_dim(&self) -> usize {
        if self.is_augmented() {
            2
        } else {
            2 * self.half_dim()
        }
    }
}

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box upper corner", lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("empty box".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[-r, r]^n`.
    pub fn cube(n: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; n],
            hi: vec![r; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| rng.random_range(a..b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

fn embed_physical_slice(x: &[f64]) -> Vec<f64> {
    vec![x[0], x[0], x[1], -x[1]]
}

/// `(q_a, q_b, π_a, π_b) ↦ ((q_a+q_b)/2, (q_a+q_b)/2, (π_a-π_b)/2, -(π_a-π_b)/2)`.
pub fn physical_limit_project(x: &PhasePoint) -> Result<PhasePoint> {
    check_dim("augmented state", 4, x.as_slice().len())?;
    Ok(PhasePoint::raw(project_slice(x.as_slice())))
}

pub(crate) fn project_slice<T: Real>(x: &[T]) -> Vec<T> {
    let q = (x[0] + x[1]).scale(0.5);
    let p = (x[2] - x[3]).scale(0.5);
    vec![q, q, p, -p]
}

/// `(q, p) ↦ (q, q, p, -p)`.
pub fn embed_physical(q: f64, p: f64) -> PhasePoint {
    PhasePoint::raw(embed_physical_slice(&[q, p]))
}

/// Physical `(q, p) = (q_a, π_a)` of an augmented state.
pub fn physical_state(x: &PhasePoint) -> Result<PhasePoint> {
    check_dim("augmented state", 4, x.as_slice().len())?;
    Ok(PhasePoint::raw(vec![x.as_slice()[0], x.as_slice()[2]]))
}

/// `J ∇H` recovered from a gradient, for cross-checks.
pub fn hamiltonian_field_from_gradient(grad: &[f64]) -> Vec<f64> {
    apply_j(grad)
}
