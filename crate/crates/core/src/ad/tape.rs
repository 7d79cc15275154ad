use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use smallvec::SmallVec;

use super::Real;

const CONST: u32 = u32::MAX;

#[derive(Default)]
struct Inner {
    // node i owns edges offsets[i]..offsets[i+1]
    offsets: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// A reverse-mode recording.
///
/// Nodes are appended in evaluation order; every edge points to an
/// earlier node, so a single backward sweep accumulates adjoints.
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let mut inner = Inner {
            offsets: Vec::with_capacity(nodes + 1),
            parents: Vec::with_capacity(2 * nodes),
            partials: Vec::with_capacity(2 * nodes),
        };
        inner.offsets.push(0);
        Self {
            inner: RefCell::new(inner),
        }
    }

    /// An independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(std::iter::empty());
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, edges: impl Iterator<Item = (u32, f64)>) -> u32 {
        let mut inner = self.inner.borrow_mut();
        for (p, d) in edges {
            inner.parents.push(p);
            inner.partials.push(d);
        }
        let end = inner.parents.len() as u32;
        inner.offsets.push(end);
        (inner.offsets.len() - 2) as u32
    }

    /// Adjoints of every recorded node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Adjoints {
        let inner = self.inner.borrow();
        let n = inner.offsets.len() - 1;
        let mut adj = vec![0.0; n];
        if output.idx == CONST {
            return Adjoints(adj);
        }
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (lo, hi) = (inner.offsets[i] as usize, inner.offsets[i + 1] as usize);
            for e in lo..hi {
                adj[inner.parents[e] as usize] += a * inner.partials[e];
            }
        }
        Adjoints(adj)
    }
}

/// Result of a backward sweep.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn get(&self, v: &Var<'_>) -> f64 {
        if v.idx == CONST {
            0.0
        } else {
            self.0[v.idx as usize]
        }
    }

    pub fn collect(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|v| self.get(v)).collect()
    }

    /// Add the adjoints of `vars` into `out`.
    pub fn accumulate(&self, vars: &[Var<'_>], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(vars) {
            *o += self.get(v);
        }
    }
}

/// A scalar recorded on a [`Tape`] (or a free constant).
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.idx == CONST {
            write!(f, "Var(const {})", self.val)
        } else {
            write!(f, "Var(#{} = {})", self.idx, self.val)
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Self {
            tape: None,
            idx: CONST,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.idx == CONST
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Self::constant(val),
            Some(t) => Self {
                tape: Some(t),
                idx: t.push(std::iter::once((self.idx, d))),
                val,
            },
        }
    }

    #[inline]
    fn binary(self, o: Self, val: f64, da: f64, db: f64) -> Self {
        let tape = match (self.tape, o.tape) {
            (None, None) => return Self::constant(val),
            (Some(t), _) | (None, Some(t)) => t,
        };
        let edges = [(self.idx, da), (o.idx, db)];
        let idx = tape.push(edges.into_iter().filter(|e| e.0 != CONST));
        Self {
            tape: Some(tape),
            idx,
            val,
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        // multiplying by an exact constant zero kills the dependency
        if (self.is_constant() && self.val == 0.0) || (o.is_constant() && o.val == 0.0) {
            return Self::constant(0.0);
        }
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl Real for Var<'_> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }

    #[inline]
    fn value(&self) -> f64 {
        self.val
    }

    #[inline]
    fn tanh(self) -> Self {
        let y = self.val.tanh();
        self.unary(y, 1.0 - y * y)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let tape = a.iter().chain(b).find_map(|v| v.tape);
        let val: f64 = a.iter().zip(b).map(|(x, y)| x.val * y.val).sum();
        let Some(tape) = tape else {
            return Self::constant(val);
        };
        let mut edges: SmallVec<[(u32, f64); 64]> = SmallVec::new();
        for (x, y) in a.iter().zip(b) {
            if !x.is_constant() && y.val != 0.0 {
                edges.push((x.idx, y.val));
            }
            if !y.is_constant() && x.val != 0.0 {
                edges.push((y.idx, x.val));
            }
        }
        Self {
            tape: Some(tape),
            idx: tape.push(edges.into_iter()),
            val,
        }
    }

    fn sum(a: &[Self]) -> Self {
        let tape = a.iter().find_map(|v| v.tape);
        let val: f64 = a.iter().map(|x| x.val).sum();
        let Some(tape) = tape else {
            return Self::constant(val);
        };
        let edges = a.iter().filter(|x| !x.is_constant()).map(|x| (x.idx, 1.0));
        Self {
            tape: Some(tape),
            idx: tape.push(edges),
            val,
        }
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }

    #[inline]
    fn square(self) -> Self {
        self.unary(self.val * self.val, 2.0 * self.val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Dual;

    #[test]
    fn gradient_of_polynomial() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(-2.0);
        let f = x * x * y + y.tanh();
        let g = tape.gradient(f);
        assert_eq!(g.get(&x), 2.0 * 3.0 * -2.0);
        let dy = 9.0 + (1.0 - (-2.0f64).tanh().powi(2));
        assert!((g.get(&y) - dy).abs() < 1e-14);
    }

    #[test]
    fn constants_are_not_recorded() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let c = Var::constant(2.0) * Var::constant(4.0);
        assert!(c.is_constant());
        let before = tape.len();
        let _ = c + Var::constant(1.0);
        assert_eq!(tape.len(), before);
        let z = x * Var::constant(0.0);
        assert!(z.is_constant());
    }

    #[test]
    fn dot_and_sum_nodes() {
        let tape = Tape::new();
        let a = tape.vars(&[1.0, 2.0, 3.0]);
        let b = vec![Var::constant(0.5), tape.var(-1.0), Var::constant(2.0)];
        let f = Real::dot(&a, &b) + Real::sum(&a);
        assert_eq!(f.value(), 0.5 - 2.0 + 6.0 + 6.0);
        let g = tape.gradient(f);
        assert_eq!(g.collect(&a), vec![1.5, 0.0, 3.0]);
        assert_eq!(g.get(&b[1]), 2.0);
    }

    #[test]
    fn nested_dual_over_tape() {
        // d/dx of (x^2 * w) is 2 x w; its gradient in w is 2x.
        let tape = Tape::new();
        let w = tape.var(0.7);
        let x = Dual::variable(Var::constant(1.3));
        let wd = Dual::constant(w);
        let f = x * x * wd;
        let g = tape.gradient(f.eps);
        assert!((f.eps.value() - 2.0 * 1.3 * 0.7).abs() < 1e-14);
        assert!((g.get(&w) - 2.6).abs() < 1e-14);
    }

    #[test]
    fn division() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = tape.var(5.0);
        let f = x / y;
        let g = tape.gradient(f);
        assert!((g.get(&x) - 0.2).abs() < 1e-15);
        assert!((g.get(&y) + 2.0 / 25.0).abs() < 1e-15);
    }
}
