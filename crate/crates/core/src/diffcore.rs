//! The scalar potential networks `V(t, q)` that parametrize every shear layer.
//!
//! A potential is `l3 ∘ tanh ∘ l2 ∘ tanh ∘ l1 ([q; t])` with affine maps
//! `l1: R^{d+1} -> R^h`, `l2: R^h -> R^h`, `l3: R^h -> R`. Derivatives in
//! `(q, t)` are written out in closed form (one backward pass through the two
//! hidden layers); higher derivatives and parameter gradients come from
//! running the same code on [`Dual`] and [`Var`] scalars.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::ad::{lift, Dual, Real, Tape, Var};
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_HIDDEN: usize = 10;

/// Input dimension and hidden width of a potential network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub d: usize,
    pub h: usize,
}

impl NetShape {
    pub fn new(d: usize, h: usize) -> Self {
        assert!(d > 0 && h > 0, "network dimensions must be positive");
        Self { d, h }
    }

    /// `h(d+1) + h + h² + h + h + 1`.
    pub fn param_count(&self) -> usize {
        let (d, h) = (self.d, self.h);
        h * (d + 1) + h + h * h + h + h + 1
    }

    // offsets into the canonical parameter order
    pub(crate) fn a1(&self) -> usize {
        0
    }
    pub(crate) fn b1(&self) -> usize {
        self.h * (self.d + 1)
    }
    pub(crate) fn a2(&self) -> usize {
        self.b1() + self.h
    }
    pub(crate) fn b2(&self) -> usize {
        self.a2() + self.h * self.h
    }
    pub(crate) fn a3(&self) -> usize {
        self.b2() + self.h
    }
    pub(crate) fn b3(&self) -> usize {
        self.a3() + self.h
    }

    /// Index of the `b3` scalar in the parameter vector.
    pub fn output_bias_index(&self) -> usize {
        self.b3()
    }

    /// Index of `A1[row, col]`; column `d` is the time column.
    pub fn a1_index(&self, row: usize, col: usize) -> usize {
        row * (self.d + 1) + col
    }

    /// Fan-in of the layer owning parameter `k`.
    fn fan_in(&self, k: usize) -> usize {
        if k < self.a2() {
            self.d + 1
        } else {
            self.h
        }
    }
}

/// Flat parameters in canonical order: `A1` (row-major), `b1`, `A2`
/// (row-major), `b2`, `A3`, `b3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Derivative quantities a potential exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantityKind {
    Value,
    TimePartial,
    InputGradient,
    MixedTimeInputGradient,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 4] = [
        QuantityKind::Value,
        QuantityKind::TimePartial,
        QuantityKind::InputGradient,
        QuantityKind::MixedTimeInputGradient,
    ];

    pub fn output_dim(&self, d: usize) -> usize {
        match self {
            QuantityKind::Value | QuantityKind::TimePartial => 1,
            QuantityKind::InputGradient | QuantityKind::MixedTimeInputGradient => d,
        }
    }
}

/// Gradient of a potential with respect to its inputs.
#[derive(Clone, Debug)]
pub(crate) struct InputGrad<T> {
    pub dq: SmallVec<[T; 4]>,
    pub dt: T,
}

fn hidden<T: Real>(shape: NetShape, w: &[T], t: T, q: &[T]) -> (Vec<T>, Vec<T>) {
    let (d, h) = (shape.d, shape.h);
    let mut input: SmallVec<[T; 8]> = SmallVec::with_capacity(d + 1);
    input.extend_from_slice(q);
    input.push(t);
    let a1 = &w[shape.a1()..shape.b1()];
    let b1 = &w[shape.b1()..shape.a2()];
    let first: Vec<T> = (0..h)
        .map(|i| (T::dot(&a1[i * (d + 1)..(i + 1) * (d + 1)], &input) + b1[i]).tanh())
        .collect();
    let a2 = &w[shape.a2()..shape.b2()];
    let b2 = &w[shape.b2()..shape.a3()];
    let second: Vec<T> = (0..h)
        .map(|i| (T::dot(&a2[i * h..(i + 1) * h], &first) + b2[i]).tanh())
        .collect();
    (first, second)
}

pub(crate) fn potential_value<T: Real>(shape: NetShape, w: &[T], t: T, q: &[T]) -> T {
    let (_, second) = hidden(shape, w, t, q);
    T::dot(&w[shape.a3()..shape.b3()], &second) + w[shape.b3()]
}

/// `(∇_q V, ∂_t V)` by a closed-form backward pass.
pub(crate) fn potential_input_grad<T: Real>(
    shape: NetShape,
    w: &[T],
    t: T,
    q: &[T],
) -> InputGrad<T> {
    let (d, h) = (shape.d, shape.h);
    let one = T::from_f64(1.0);
    let (first, second) = hidden(shape, w, t, q);
    let a3 = &w[shape.a3()..shape.b3()];
    let g2: Vec<T> = (0..h).map(|i| a3[i] * (one - second[i] * second[i])).collect();
    let a2 = &w[shape.a2()..shape.b2()];
    let mut col: SmallVec<[T; 16]> = SmallVec::with_capacity(h);
    let g1: Vec<T> = (0..h)
        .map(|j| {
            col.clear();
            col.extend((0..h).map(|i| a2[i * h + j]));
            T::dot(&col, &g2) * (one - first[j] * first[j])
        })
        .collect();
    let a1 = &w[shape.a1()..shape.b1()];
    let mut grad: SmallVec<[T; 8]> = (0..=d)
        .map(|k| {
            col.clear();
            col.extend((0..h).map(|i| a1[i * (d + 1) + k]));
            T::dot(&col, &g1)
        })
        .collect();
    let dt = grad.pop().expect("d + 1 > 0");
    InputGrad {
        dq: grad.into_iter().collect(),
        dt,
    }
}

/// A scalar-valued potential network `V(t, q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialNet {
    shape: NetShape,
    params: ParamVector,
}

impl PotentialNet {
    pub fn zeros(d: usize, h: usize) -> Self {
        let shape = NetShape::new(d, h);
        Self {
            shape,
            params: ParamVector::zeros(shape.param_count()),
        }
    }

    /// Uniform initialization on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn random<R: Rng + ?Sized>(d: usize, h: usize, rng: &mut R) -> Self {
        let shape = NetShape::new(d, h);
        let mut params = vec![0.0; shape.param_count()];
        init_uniform(shape, &mut params, rng);
        Self {
            shape,
            params: ParamVector(params),
        }
    }

    pub fn from_params(d: usize, h: usize, params: Vec<f64>) -> Result<Self> {
        let shape = NetShape::new(d, h);
        check_dim("potential parameters", shape.param_count(), params.len())?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self {
            shape,
            params: ParamVector(params),
        })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn d(&self) -> usize {
        self.shape.d
    }

    pub fn h(&self) -> usize {
        self.shape.h
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params.0
    }

    pub fn param_count(&self) -> usize {
        self.shape.param_count()
    }

    fn check(&self, t: f64, q: &[f64]) -> Result<()> {
        check_dim("potential input", self.shape.d, q.len())?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite time {t}")));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, q: &[f64]) -> Result<f64> {
        self.check(t, q)?;
        Ok(potential_value(self.shape, &self.params.0, t, q))
    }

    /// Exact `∂V/∂t`.
    pub fn time_partial(&self, t: f64, q: &[f64]) -> Result<f64> {
        self.check(t, q)?;
        Ok(potential_input_grad(self.shape, &self.params.0, t, q).dt)
    }

    /// Exact `∇_q V`.
    pub fn grad_input(&self, t: f64, q: &[f64]) -> Result<Vec<f64>> {
        self.check(t, q)?;
        Ok(potential_input_grad(self.shape, &self.params.0, t, q).dq.to_vec())
    }

    /// Exact `∂_t ∇_q V`.
    pub fn mixed_time_input_gradient(&self, t: f64, q: &[f64]) -> Result<Vec<f64>> {
        self.check(t, q)?;
        let w: Vec<Dual<f64>> = Dual::constants(&self.params.0);
        let qd = Dual::constants(q);
        let g = potential_input_grad(self.shape, &w, Dual::variable(t), &qd);
        Ok(g.dq.iter().map(|x| x.eps).collect())
    }

    /// Exact `(∇²_q V) v`.
    pub fn hessian_vector_product(&self, t: f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(t, q)?;
        check_dim("hvp direction", self.shape.d, v.len())?;
        let w: Vec<Dual<f64>> = Dual::constants(&self.params.0);
        let qd = Dual::seed(q, v);
        let g = potential_input_grad(self.shape, &w, Dual::constant(t), &qd);
        Ok(g.dq.iter().map(|x| x.eps).collect())
    }

    /// Gradient in all parameters of `<cotangent, quantity(t, q)>`.
    pub fn param_grad(
        &self,
        quantity: QuantityKind,
        t: f64,
        q: &[f64],
        cotangent: &[f64],
    ) -> Result<ParamVector> {
        self.check(t, q)?;
        check_dim("cotangent", quantity.output_dim(self.shape.d), cotangent.len())?;
        let tape = Tape::new();
        let w = tape.vars(&self.params.0);
        let out = quantity_on(self.shape, &w, quantity, t, q);
        let ct: Vec<Var> = lift(cotangent);
        let scalar = Var::dot(&out, &ct);
        Ok(ParamVector(tape.gradient(scalar).collect(&w)))
    }
}

/// Any exported quantity evaluated with generic parameters.
pub(crate) fn quantity_on<T: Real>(
    shape: NetShape,
    w: &[T],
    quantity: QuantityKind,
    t: f64,
    q: &[f64],
) -> Vec<T> {
    let qt: Vec<T> = lift(q);
    let tt = T::from_f64(t);
    match quantity {
        QuantityKind::Value => vec![potential_value(shape, w, tt, &qt)],
        QuantityKind::TimePartial => vec![potential_input_grad(shape, w, tt, &qt).dt],
        QuantityKind::InputGradient => potential_input_grad(shape, w, tt, &qt).dq.to_vec(),
        QuantityKind::MixedTimeInputGradient => {
            let wd: Vec<Dual<T>> = Dual::constants(w);
            let qd: Vec<Dual<T>> = Dual::constants(&qt);
            let g = potential_input_grad(shape, &wd, Dual::variable(tt), &qd);
            Dual::tangents(&g.dq)
        }
    }
}

pub(crate) fn init_uniform<R: Rng + ?Sized>(shape: NetShape, params: &mut [f64], rng: &mut R) {
    for (k, p) in params.iter_mut().enumerate() {
        let bound = (1.0 / shape.fan_in(k) as f64).sqrt();
        *p = rng.random_range(-bound..=bound);
    }
}
