//! Convex envelope of the lifted data term.
//!
//! A point `w` of the lifted domain `1 >= w_1 >= ... >= w_l >= 0` has the
//! unique vertex weights `d_k = w_k - w_{k+1}` (with `w_0 = 1`,
//! `w_{l+1} = 0`). The envelope value is the cheapest way to spend those
//! weights on the lifted graph: the weight of vertex `k` is split between the
//! two intervals meeting there, and by convexity of each per-interval hull
//! the mass an interval receives is best concentrated at its barycenter.
//! That leaves a convex chain problem in the `l - 1` split amounts, solved
//! here by an interior-point Newton method (quadratic pieces) or a small LP over the hull
//! knots (sampled pieces).

use super::knot_qp::KnotSet;
use super::labels::LabelSet;
use super::lp;
use super::piece::{HullPiece, PieceModel};
use crate::error::{Error, Result};

/// Slack allowed on the domain constraints before a point is declared outside.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Evaluable convex envelope of one pixel's lifted data term.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeModel {
    pub(crate) hulls: Vec<HullPiece>,
    quadratic: bool,
    /// Hull knots as lifted points (sampled models only).
    pub(crate) knots: Option<KnotSet>,
}

/// Build the envelope of `model` on the lifted label space of `labels`.
pub fn build_envelope(model: &PieceModel, labels: &LabelSet) -> Result<EnvelopeModel> {
    if model.intervals() != labels.intervals() {
        return Err(Error::Model(format!(
            "model has {} pieces but the label set has {} intervals",
            model.intervals(),
            labels.intervals()
        )));
    }
    let hulls = model
        .pieces()
        .iter()
        .enumerate()
        .map(|(i, p)| HullPiece::from_piece(p, labels.labels()[i], labels.widths()[i]))
        .collect::<Vec<_>>();
    let quadratic = model.is_quadratic();
    let knots = (!quadratic).then(|| KnotSet::new(&hulls));
    Ok(EnvelopeModel { hulls, quadratic, knots })
}

impl EnvelopeModel {
    pub fn intervals(&self) -> usize {
        self.hulls.len()
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic
    }

    /// Length of the warm-start state used by the prox: mixture weights per
    /// interval, or per hull knot for sampled models.
    pub fn prox_state_len(&self) -> usize {
        self.knots.as_ref().map_or(self.hulls.len(), KnotSet::len)
    }

    /// Envelope value at `u`; `+inf` outside the lifted domain.
    pub fn eval(&self, u: &[f64]) -> f64 {
        envelope_eval(self, u)
    }
}

/// Vertex weights of `u`, or `None` when `u` lies outside the lifted domain.
pub(crate) fn vertex_weights(u: &[f64]) -> Option<Vec<f64>> {
    let l = u.len();
    let mut d = Vec::with_capacity(l + 1);
    let mut prev = 1.0;
    for &x in u.iter().chain(std::iter::once(&0.0)) {
        let w = prev - x;
        if !(w >= -DOMAIN_TOL) {
            return None;
        }
        d.push(w.max(0.0));
        prev = x;
    }
    debug_assert_eq!(d.len(), l + 1);
    Some(d)
}

/// Envelope value `rho**(u)`.
pub fn envelope_eval(env: &EnvelopeModel, u: &[f64]) -> f64 {
    assert_eq!(u.len(), env.intervals(), "dimension mismatch");
    let Some(d) = vertex_weights(u) else {
        return f64::INFINITY;
    };
    if env.quadratic {
        chain_barrier(&env.hulls, &d)
    } else {
        hull_lp(&env.hulls, &d).unwrap_or(f64::INFINITY)
    }
}

/// Cost of `m` units of mass placed at barycenter `b/m` of interval `j`, with
/// its partial derivatives in `b` and `c = m - b` and curvature scale.
struct EdgeTerm {
    value: f64,
    db: f64,
    dc: f64,
    // Hessian in (b, c) is `scale * [(1-a)^2, -a(1-a); -a(1-a), a^2]`.
    scale: f64,
    alpha: f64,
}

fn edge_term(hull: &HullPiece, b: f64, c: f64) -> EdgeTerm {
    let HullPiece::Quadratic { q2, q1, q0 } = *hull else {
        unreachable!("chain solver only handles quadratic hulls")
    };
    let m = b + c;
    if m <= 0.0 {
        return EdgeTerm {
            value: 0.0,
            db: q2 + q1 + q0,
            dc: q0,
            scale: 0.0,
            alpha: 0.0,
        };
    }
    let a = (b / m).clamp(0.0, 1.0);
    let rho = (q2 * a + q1) * a + q0;
    let drho = 2.0 * q2 * a + q1;
    EdgeTerm {
        value: m * rho,
        db: rho + (1.0 - a) * drho,
        dc: rho - a * drho,
        scale: 2.0 * q2 / m,
        alpha: a,
    }
}

/// Split amounts `x_k` (vertex `k` to interval `k-1`), `k = 1..l-1`.
fn split_ends(d: &[f64], x: &[f64], j: usize) -> (f64, f64) {
    let l = d.len() - 1;
    let b = if j + 1 < l { x[j] } else { d[l] };
    let c = if j == 0 { d[0] } else { d[j] - x[j - 1] };
    (b, c)
}

fn chain_value(hulls: &[HullPiece], d: &[f64], x: &[f64]) -> f64 {
    (0..hulls.len())
        .map(|j| {
            let (b, c) = split_ends(d, x, j);
            edge_term(&hulls[j], b, c).value
        })
        .sum()
}

/// Interior-point (log-barrier) Newton on the box `0 <= x_k <= d_{k+1}`.
/// The chain objective is not differentiable where an interval receives no
/// mass; the barrier keeps iterates away from those corners and leaves a
/// suboptimality of at most `2 (l - 1) mu` at the final barrier weight.
fn chain_barrier(hulls: &[HullPiece], d: &[f64]) -> f64 {
    let l = hulls.len();
    let upper = &d[1..l];
    // Splits of empty vertices are fixed at zero.
    let vars: Vec<usize> = (0..l - 1).filter(|&k| upper[k] > 0.0).collect();
    let n = vars.len();
    let mut x: Vec<f64> = vec![0.0; l - 1];
    for &k in &vars {
        x[k] = 0.5 * upper[k];
    }
    if n == 0 {
        return chain_value(hulls, d, &x);
    }
    let barrier = |x: &[f64], mu: f64| -> f64 {
        let mut v = chain_value(hulls, d, x);
        for &k in &vars {
            let (lo, hi) = (x[k], upper[k] - x[k]);
            if !(lo > 0.0 && hi > 0.0) {
                return f64::INFINITY;
            }
            v -= mu * (lo.ln() + hi.ln());
        }
        v
    };
    let mut grad_full = vec![0.0; l - 1];
    let mut hess_full = vec![0.0; (l - 1) * (l - 1)];
    let mut mu = 0.1 * (1.0 + chain_value(hulls, d, &x).abs());
    loop {
        let mut value = barrier(&x, mu);
        for _ in 0..100 {
            chain_derivatives(hulls, d, &x, &mut grad_full, &mut hess_full);
            let mut sys = vec![0.0; n * n];
            let mut rhs = vec![0.0; n];
            for (a, &i) in vars.iter().enumerate() {
                let (lo, hi) = (x[i], upper[i] - x[i]);
                rhs[a] = -(grad_full[i] - mu / lo + mu / hi);
                for (b, &k) in vars.iter().enumerate() {
                    sys[a * n + b] = hess_full[i * (l - 1) + k];
                }
                sys[a * n + a] += mu / (lo * lo) + mu / (hi * hi);
            }
            let g_dot: Vec<f64> = rhs.clone();
            let Some(step) = super::solve_spd(&mut sys, &mut rhs, n) else {
                break;
            };
            let decrement: f64 = step.iter().zip(&g_dot).map(|(s, g)| s * g).sum();
            if !(decrement > 1e-14 * mu) {
                break;
            }
            // Stay strictly inside the box.
            let mut t = 1.0f64;
            for (a, &i) in vars.iter().enumerate() {
                if step[a] < 0.0 {
                    t = t.min(0.99 * x[i] / -step[a]);
                } else if step[a] > 0.0 {
                    t = t.min(0.99 * (upper[i] - x[i]) / step[a]);
                }
            }
            let mut trial = x.clone();
            let mut accepted = false;
            for _ in 0..60 {
                for (a, &i) in vars.iter().enumerate() {
                    trial[i] = x[i] + t * step[a];
                }
                let v = barrier(&trial, mu);
                if v <= value - 0.25 * t * decrement {
                    x.copy_from_slice(&trial);
                    value = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let objective = chain_value(hulls, d, &x);
        if 2.0 * n as f64 * mu <= 1e-14 * (1.0 + objective.abs()) {
            return objective;
        }
        mu *= 0.1;
    }
}

/// Gradient and Hessian of the chain objective in the split amounts.
fn chain_derivatives(hulls: &[HullPiece], d: &[f64], x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
    let l = hulls.len();
    let n = l - 1;
    grad.iter_mut().for_each(|g| *g = 0.0);
    hess.iter_mut().for_each(|h| *h = 0.0);
    for j in 0..l {
        let (b, c) = split_ends(d, x, j);
        let t = edge_term(&hulls[j], b, c);
        let (a, s) = (t.alpha, t.scale);
        let hbb = s * (1.0 - a) * (1.0 - a);
        let hcc = s * a * a;
        let hbc = -s * a * (1.0 - a);
        // b_j = x_j (j < l-1), c_j = d_j - x_{j-1} (j > 0).
        let bi = (j + 1 < l).then_some(j);
        let ci = (j > 0).then(|| j - 1);
        if let Some(i) = bi {
            grad[i] += t.db;
            hess[i * n + i] += hbb;
        }
        if let Some(i) = ci {
            grad[i] -= t.dc;
            hess[i * n + i] += hcc;
        }
        if let (Some(i), Some(k)) = (bi, ci) {
            hess[i * n + k] -= hbc;
            hess[k * n + i] -= hbc;
        }
    }
}

/// Sampled pieces: LP over the hull knots placed on the lifted graph.
fn hull_lp(hulls: &[HullPiece], d: &[f64]) -> Option<f64> {
    let l = hulls.len();
    let mut cols: Vec<(usize, f64, f64)> = Vec::new();
    for (j, hull) in hulls.iter().enumerate() {
        let HullPiece::Linear { knots, values, .. } = hull else {
            unreachable!("LP path only handles sampled hulls")
        };
        for (&a, &v) in knots.iter().zip(values) {
            cols.push((j, a, v));
        }
    }
    // Rows: total mass, then each lifted coordinate.
    let mut a = vec![vec![0.0; cols.len()]; l + 1];
    let mut b = vec![0.0; l + 1];
    b[0] = 1.0;
    let mut w = vec![0.0; l];
    let mut tail = 0.0;
    for r in (0..l).rev() {
        tail += d[r + 1];
        w[r] = tail;
    }
    for (k, &(j, alpha, _)) in cols.iter().enumerate() {
        a[0][k] = 1.0;
        for r in 0..j {
            a[r + 1][k] = 1.0;
        }
        a[j + 1][k] = alpha;
    }
    b[1..].copy_from_slice(&w);
    let cost: Vec<f64> = cols.iter().map(|c| c.2).collect();
    lp::minimize(&a, &b, &cost)
}
