//! Hand-written reverse passes for the SympFlow training losses.
//!
//! The generic tape records every scalar operation, which is accurate but
//! slow for the nested (time tangent inside parameter gradient) quantities
//! the residual loss needs. Here each potential-gradient evaluation is one
//! block with its own forward tangent and adjoint, so the cost per point is
//! a small multiple of a plain forward pass. The generic tape remains the
//! reference these routines are tested against.

use smallvec::SmallVec;

use crate::ad::Dual;
use crate::diffcore::NetShape;
use crate::flow::FlowMap;
use crate::model::{Shear, SympFlowModel};
use crate::systems::SystemSpec;

type Buf = SmallVec<[f64; 16]>;

fn zeros(n: usize) -> Buf {
    SmallVec::from_elem(0.0, n)
}

/// Activations of one `(∇_z V, ∂_t V)` evaluation and of its tangent along
/// the input direction `u̇`.
struct PgCache {
    tan: bool,
    u: Buf,
    ud: Buf,
    h1: Buf,
    s1: Buf,
    ad1: Buf,
    hd1: Buf,
    sd1: Buf,
    s2: Buf,
    h2: Buf,
    ad2: Buf,
    hd2: Buf,
    sd2: Buf,
    g2: Buf,
    gd2: Buf,
    m1: Buf,
    md1: Buf,
    g1: Buf,
    gd1: Buf,
}

/// Gradient `G = ∇_u V(u)` at `u = [z; t]` and its tangent `Ġ = ∇²V u̇`.
fn pg_forward(shape: NetShape, w: &[f64], u: &[f64], ud: &[f64], tan: bool) -> (PgCache, Buf, Buf) {
    let (d, h) = (shape.d, shape.h);
    let n = d + 1;
    let a1 = &w[shape.a1()..shape.b1()];
    let b1 = &w[shape.b1()..shape.a2()];
    let a2 = &w[shape.a2()..shape.b2()];
    let b2 = &w[shape.b2()..shape.a3()];
    let a3 = &w[shape.a3()..shape.b3()];

    let mut c = PgCache {
        tan,
        u: u.into(),
        ud: ud.into(),
        h1: zeros(h),
        s1: zeros(h),
        ad1: zeros(h),
        hd1: zeros(h),
        sd1: zeros(h),
        s2: zeros(h),
        h2: zeros(h),
        ad2: zeros(h),
        hd2: zeros(h),
        sd2: zeros(h),
        g2: zeros(h),
        gd2: zeros(h),
        m1: zeros(h),
        md1: zeros(h),
        g1: zeros(h),
        gd1: zeros(h),
    };
    for i in 0..h {
        let row = &a1[i * n..(i + 1) * n];
        let a: f64 = row.iter().zip(u).map(|(x, y)| x * y).sum::<f64>() + b1[i];
        let y = a.tanh();
        c.h1[i] = y;
        c.s1[i] = 1.0 - y * y;
        if tan {
            c.ad1[i] = row.iter().zip(ud).map(|(x, y)| x * y).sum();
            c.hd1[i] = c.s1[i] * c.ad1[i];
            c.sd1[i] = -2.0 * y * c.hd1[i];
        }
    }
    for i in 0..h {
        let row = &a2[i * h..(i + 1) * h];
        let a: f64 = row.iter().zip(&c.h1).map(|(x, y)| x * y).sum::<f64>() + b2[i];
        let y = a.tanh();
        c.h2[i] = y;
        c.s2[i] = 1.0 - y * y;
        c.g2[i] = a3[i] * c.s2[i];
        if tan {
            c.ad2[i] = row.iter().zip(&c.hd1).map(|(x, y)| x * y).sum();
            c.hd2[i] = c.s2[i] * c.ad2[i];
            c.sd2[i] = -2.0 * y * c.hd2[i];
            c.gd2[i] = a3[i] * c.sd2[i];
        }
    }
    for i in 0..h {
        let row = &a2[i * h..(i + 1) * h];
        for j in 0..h {
            c.m1[j] += row[j] * c.g2[i];
            if tan {
                c.md1[j] += row[j] * c.gd2[i];
            }
        }
    }
    let mut g = zeros(n);
    let mut gd = zeros(n);
    for j in 0..h {
        c.g1[j] = c.m1[j] * c.s1[j];
        if tan {
            c.gd1[j] = c.md1[j] * c.s1[j] + c.m1[j] * c.sd1[j];
        }
        let row = &a1[j * n..(j + 1) * n];
        for k in 0..n {
            g[k] += row[k] * c.g1[j];
            if tan {
                gd[k] += row[k] * c.gd1[j];
            }
        }
    }
    (c, g, gd)
}

/// Reverse of [`pg_forward`]: accumulates into `wbar`, `ubar` and `udbar`.
fn pg_backward(
    shape: NetShape,
    w: &[f64],
    c: &PgCache,
    gbar: &[f64],
    gdbar: &[f64],
    wbar: &mut [f64],
    ubar: &mut [f64],
    udbar: &mut [f64],
) {
    let (d, h) = (shape.d, shape.h);
    let n = d + 1;
    let tan = c.tan;
    let a1 = &w[shape.a1()..shape.b1()];
    let a2 = &w[shape.a2()..shape.b2()];
    let a3 = &w[shape.a3()..shape.b3()];
    let (oa1, ob1, oa2, ob2, oa3) = (shape.a1(), shape.b1(), shape.a2(), shape.b2(), shape.a3());

    // G = A1ᵀ g1, Ġ = A1ᵀ ġ1
    let mut g1bar = zeros(h);
    let mut gd1bar = zeros(h);
    for j in 0..h {
        let row = &a1[j * n..(j + 1) * n];
        for k in 0..n {
            wbar[oa1 + j * n + k] += c.g1[j] * gbar[k] + if tan { c.gd1[j] * gdbar[k] } else { 0.0 };
            g1bar[j] += row[k] * gbar[k];
            if tan {
                gd1bar[j] += row[k] * gdbar[k];
            }
        }
    }
    // g1 = m1 s1, ġ1 = ṁ1 s1 + m1 ṡ1
    let mut m1bar = zeros(h);
    let mut md1bar = zeros(h);
    let mut s1bar = zeros(h);
    let mut sd1bar = zeros(h);
    for j in 0..h {
        m1bar[j] = g1bar[j] * c.s1[j] + gd1bar[j] * c.sd1[j];
        md1bar[j] = gd1bar[j] * c.s1[j];
        s1bar[j] = g1bar[j] * c.m1[j] + gd1bar[j] * c.md1[j];
        sd1bar[j] = gd1bar[j] * c.m1[j];
    }
    // m1 = A2ᵀ g2, ṁ1 = A2ᵀ ġ2
    let mut g2bar = zeros(h);
    let mut gd2bar = zeros(h);
    for i in 0..h {
        let row = &a2[i * h..(i + 1) * h];
        for j in 0..h {
            wbar[oa2 + i * h + j] += c.g2[i] * m1bar[j] + if tan { c.gd2[i] * md1bar[j] } else { 0.0 };
            g2bar[i] += row[j] * m1bar[j];
            if tan {
                gd2bar[i] += row[j] * md1bar[j];
            }
        }
    }
    // g2 = a3 s2, ġ2 = a3 ṡ2, then back through the second tanh layer
    let mut a2bar = zeros(h);
    let mut ad2bar = zeros(h);
    for i in 0..h {
        wbar[oa3 + i] += g2bar[i] * c.s2[i] + gd2bar[i] * c.sd2[i];
        let mut s2bar = g2bar[i] * a3[i];
        let sd2bar = gd2bar[i] * a3[i];
        // ṡ2 = -2 h2 ḣ2
        let mut h2bar = -2.0 * c.hd2[i] * sd2bar;
        let hd2bar = -2.0 * c.h2[i] * sd2bar;
        // ḣ2 = s2 ȧ2
        s2bar += hd2bar * c.ad2[i];
        ad2bar[i] = hd2bar * c.s2[i];
        // s2 = 1 - h2²
        h2bar += -2.0 * c.h2[i] * s2bar;
        a2bar[i] = h2bar * c.s2[i];
    }
    // a2 = A2 h1 + b2, ȧ2 = A2 ḣ1
    let mut h1bar = zeros(h);
    let mut hd1bar = zeros(h);
    for i in 0..h {
        let row = &a2[i * h..(i + 1) * h];
        wbar[ob2 + i] += a2bar[i];
        for j in 0..h {
            wbar[oa2 + i * h + j] += a2bar[i] * c.h1[j] + if tan { ad2bar[i] * c.hd1[j] } else { 0.0 };
            h1bar[j] += row[j] * a2bar[i];
            if tan {
                hd1bar[j] += row[j] * ad2bar[i];
            }
        }
    }
    // first tanh layer, same pattern
    let mut a1bar = zeros(h);
    let mut ad1bar = zeros(h);
    for j in 0..h {
        h1bar[j] += -2.0 * c.hd1[j] * sd1bar[j];
        hd1bar[j] += -2.0 * c.h1[j] * sd1bar[j];
        s1bar[j] += hd1bar[j] * c.ad1[j];
        ad1bar[j] = hd1bar[j] * c.s1[j];
        h1bar[j] += -2.0 * c.h1[j] * s1bar[j];
        a1bar[j] = h1bar[j] * c.s1[j];
    }
    // a1 = A1 u + b1, ȧ1 = A1 u̇
    for j in 0..h {
        let row = &a1[j * n..(j + 1) * n];
        wbar[ob1 + j] += a1bar[j];
        for k in 0..n {
            wbar[oa1 + j * n + k] += a1bar[j] * c.u[k] + if tan { ad1bar[j] * c.ud[k] } else { 0.0 };
            ubar[k] += row[k] * a1bar[j];
            if tan {
                udbar[k] += row[k] * ad1bar[j];
            }
        }
    }
}

struct ShearRecord {
    layer: usize,
    kind: Shear,
    now: PgCache,
    start: PgCache,
}

/// Forward pass of `ψ̄(t, x)` keeping what the reverse pass needs, with the
/// time velocity `d/dt ψ̄` when `tan` is set.
struct Trace {
    ops: Vec<ShearRecord>,
    y: Vec<f64>,
    v: Vec<f64>,
}

/// Index of the coordinates a shear reads (`z`) and the ones it moves, and
/// the sign of the update.
fn shear_slots(kind: Shear, d: usize) -> (usize, usize, f64) {
    match kind {
        Shear::Q => (0, d, -1.0),
        Shear::P => (d, 0, 1.0),
    }
}

fn forward(model: &SympFlowModel, t: f64, x: &[f64], tan: bool) -> Trace {
    let d = model.d();
    let shape = model.net_shape();
    let w = model.params();
    let mut y = x.to_vec();
    let mut v = vec![0.0; 2 * d];
    let mut ops = Vec::with_capacity(2 * model.layers());
    for layer in 0..model.layers() {
        for kind in [Shear::Q, Shear::P] {
            let wn = &w[model.net_range(layer, kind)];
            let (zi, mi, sign) = shear_slots(kind, d);
            let mut u: Buf = y[zi..zi + d].into();
            u.push(t);
            let mut ud: Buf = v[zi..zi + d].into();
            ud.push(if tan { 1.0 } else { 0.0 });
            let (now, gn, gdn) = pg_forward(shape, wn, &u, &ud, tan);
            u[d] = 0.0;
            ud[d] = 0.0;
            let (start, gs, gds) = pg_forward(shape, wn, &u, &ud, tan);
            for k in 0..d {
                y[mi + k] += sign * (gn[k] - gs[k]);
                if tan {
                    v[mi + k] += sign * (gdn[k] - gds[k]);
                }
            }
            ops.push(ShearRecord {
                layer,
                kind,
                now,
                start,
            });
        }
    }
    Trace { ops, y, v }
}

/// Propagate output adjoints `(ȳ, v̄)` back through the trace into `grad`.
fn backward(model: &SympFlowModel, trace: &Trace, mut ybar: Vec<f64>, mut vbar: Vec<f64>, grad: &mut [f64]) {
    let d = model.d();
    let n = d + 1;
    let shape = model.net_shape();
    let w = model.params();
    for op in trace.ops.iter().rev() {
        let range = model.net_range(op.layer, op.kind);
        let wn = &w[range.clone()];
        let (zi, mi, sign) = shear_slots(op.kind, d);
        let mut gbar = zeros(n);
        let mut gdbar = zeros(n);
        for k in 0..d {
            gbar[k] = sign * ybar[mi + k];
            gdbar[k] = sign * vbar[mi + k];
        }
        let mut ubar = zeros(n);
        let mut udbar = zeros(n);
        pg_backward(shape, wn, &op.now, &gbar, &gdbar, &mut grad[range.clone()], &mut ubar, &mut udbar);
        gbar.iter_mut().for_each(|g| *g = -*g);
        gdbar.iter_mut().for_each(|g| *g = -*g);
        pg_backward(shape, wn, &op.start, &gbar, &gdbar, &mut grad[range], &mut ubar, &mut udbar);
        for k in 0..d {
            ybar[zi + k] += ubar[k];
            vbar[zi + k] += udbar[k];
        }
    }
}

/// `‖d/dt ψ̄(t, x) - J∇H(ψ̄(t, x))‖²`; its parameter gradient is added to
/// `grad`.
pub(crate) fn residual_value_grad(model: &SympFlowModel, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> f64 {
    let trace = forward(model, t, x, true);
    let f = sys.field(&trace.y);
    let r: Vec<f64> = trace.v.iter().zip(&f).map(|(a, b)| a - b).collect();
    let value = r.iter().map(|e| e * e).sum();
    let n = r.len();
    // ȳ = -(Df)ᵀ 2r, one tangent sweep of the field per column
    let mut ybar = vec![0.0; n];
    for (j, yb) in ybar.iter_mut().enumerate() {
        let mut seed = vec![0.0; n];
        seed[j] = 1.0;
        let col = sys.field(&Dual::seed(&trace.y, &seed));
        *yb = -col.iter().zip(&r).map(|(c, ri)| 2.0 * c.eps * ri).sum::<f64>();
    }
    let vbar: Vec<f64> = r.iter().map(|e| 2.0 * e).collect();
    backward(model, &trace, ybar, vbar, grad);
    value
}

/// `‖ψ̄(t, x0) - y‖²` with gradient.
pub(crate) fn supervised_value_grad(model: &SympFlowModel, t: f64, x0: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
    let trace = forward(model, t, x0, false);
    let r: Vec<f64> = trace.y.iter().zip(target).map(|(a, b)| a - b).collect();
    let ybar = r.iter().map(|e| 2.0 * e).collect();
    backward(model, &trace, ybar, vec![0.0; r.len()], grad);
    r.iter().map(|e| e * e).sum()
}

/// `(ℋ(ψ̄)(t, x) - H(x))²` with gradient.
pub(crate) fn ham_match_value_grad(model: &SympFlowModel, t: f64, x: &[f64], sys: &SystemSpec, grad: &mut [f64]) -> f64 {
    let d = model.d();
    let n = d + 1;
    let shape = model.net_shape();
    let w = model.params();
    let none = zeros(n);
    let pg = |layer: usize, kind: Shear, z: &[f64], time: f64| {
        let mut u: Buf = z.into();
        u.push(time);
        pg_forward(shape, &w[model.net_range(layer, kind)], &u, &none, false)
    };
    // pairs are peeled off from the last one inwards
    let mut y = x.to_vec();
    let mut energy = 0.0;
    let mut recs = Vec::with_capacity(model.layers());
    for layer in (0..model.layers()).rev() {
        let (cp1, gp1, _) = pg(layer, Shear::P, &y[d..], t);
        let (cp0, gp0, _) = pg(layer, Shear::P, &y[d..], 0.0);
        let q_in: Vec<f64> = (0..d).map(|k| y[k] - (gp1[k] - gp0[k])).collect();
        let (cq1, gq1, _) = pg(layer, Shear::Q, &q_in, t);
        let (cq0, gq0, _) = pg(layer, Shear::Q, &q_in, 0.0);
        energy += gp1[d] + gq1[d];
        for k in 0..d {
            y[d + k] += gq1[k] - gq0[k];
        }
        y[..d].copy_from_slice(&q_in);
        recs.push((layer, cp1, cp0, cq1, cq0));
    }
    let diff = energy - sys.energy(x);
    let ebar = 2.0 * diff;
    let mut ybar = vec![0.0; 2 * d];
    for (layer, cp1, cp0, cq1, cq0) in recs.iter().rev() {
        let rq = model.net_range(*layer, Shear::Q);
        let rp = model.net_range(*layer, Shear::P);
        let (wq, wp) = (&w[rq.clone()], &w[rp.clone()]);
        let mut qbar: Buf = ybar[..d].into();
        let mut pbar: Buf = ybar[d..].into();
        // y_out = (q_in, p + Gq(t) - Gq(0)); energy has ∂_t Vq(t, q_in)
        let mut gbar = zeros(n);
        let mut ubar = zeros(n);
        let mut scratch = zeros(n);
        gbar[..d].copy_from_slice(&pbar);
        gbar[d] = ebar;
        pg_backward(shape, wq, cq1, &gbar, &none, &mut grad[rq.clone()], &mut ubar, &mut scratch);
        gbar.iter_mut().for_each(|g| *g = -*g);
        gbar[d] = 0.0;
        pg_backward(shape, wq, cq0, &gbar, &none, &mut grad[rq], &mut ubar, &mut scratch);
        for k in 0..d {
            qbar[k] += ubar[k];
        }
        // q_in = q - (Gp(t) - Gp(0)); energy has ∂_t Vp(t, p)
        let mut ubar = zeros(n);
        for k in 0..d {
            gbar[k] = -qbar[k];
        }
        gbar[d] = ebar;
        pg_backward(shape, wp, cp1, &gbar, &none, &mut grad[rp.clone()], &mut ubar, &mut scratch);
        gbar.iter_mut().for_each(|g| *g = -*g);
        gbar[d] = 0.0;
        pg_backward(shape, wp, cp0, &gbar, &none, &mut grad[rp], &mut ubar, &mut scratch);
        for k in 0..d {
            pbar[k] += ubar[k];
        }
        ybar[..d].copy_from_slice(&qbar);
        ybar[d..].copy_from_slice(&pbar);
    }
    diff * diff
}
