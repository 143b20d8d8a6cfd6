//! Exact prox for piecewise-linear hulls.
//!
//! With sampled pieces the envelope is the convex hull of finitely many
//! lifted knot points `P_k = 1_j^{a}` with costs `c_k`, so the prox is the
//! simplex QP `min_mu |P mu - u|^2 / (2 tau) + c^T mu`. It is solved by a
//! Wolfe-type active-set method that keeps the support affinely independent.

use super::piece::HullPiece;
use super::prox::ProxReport;
use crate::error::{Error, Result};

/// Knot points of all hulls of one pixel, stored densely (`len x l`).
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct KnotSet {
    l: usize,
    interval: Vec<usize>,
    points: Vec<f64>,
    costs: Vec<f64>,
}

impl KnotSet {
    pub fn new(hulls: &[HullPiece]) -> Self {
        let l = hulls.len();
        let mut k = KnotSet {
            l,
            interval: Vec::new(),
            points: Vec::new(),
            costs: Vec::new(),
        };
        for (j, hull) in hulls.iter().enumerate() {
            let HullPiece::Linear { knots, values, .. } = hull else {
                unreachable!("sampled envelopes have linear hulls")
            };
            for (&a, &v) in knots.iter().zip(values) {
                k.points.extend((0..l).map(|i| match i.cmp(&j) {
                    std::cmp::Ordering::Less => 1.0,
                    std::cmp::Ordering::Equal => a,
                    std::cmp::Ordering::Greater => 0.0,
                }));
                k.interval.push(j);
                k.costs.push(v);
            }
        }
        k
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.l..(k + 1) * self.l]
    }

    /// `(P_a - P_r) . (P_b - P_r)`.
    fn gram(&self, a: usize, b: usize, r: usize) -> f64 {
        let (pa, pb, pr) = (self.point(a), self.point(b), self.point(r));
        (0..self.l).map(|i| (pa[i] - pr[i]) * (pb[i] - pr[i])).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gap attributable to rounding; `(w - u) / tau` carries the `1/tau`.
fn roundoff_floor(grad: &[f64], u: &[f64], tau: f64) -> f64 {
    let g = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let x = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-14 * (1.0 + g + u.len() as f64 * x / tau)
}

/// Prox over the knot hull. `mu` holds one weight per knot; a vector summing
/// to one is used as the starting support, anything else starts cold.
pub(crate) fn prox_knots(kn: &KnotSet, u: &[f64], tau: f64, mu: &mut [f64], out: &mut [f64]) -> Result<ProxReport> {
    match solve(kn, u, tau, mu, out, true) {
        Err(_) => solve(kn, u, tau, mu, out, false),
        ok => ok,
    }
}

fn solve(kn: &KnotSet, u: &[f64], tau: f64, mu: &mut [f64], out: &mut [f64], warm: bool) -> Result<ProxReport> {
    let n = kn.len();
    let l = kn.l;
    let total: f64 = mu.iter().sum();
    let mut support: Vec<usize> = Vec::with_capacity(l + 2);
    if warm && (total - 1.0).abs() < 1e-9 && mu.iter().all(|&m| m >= 0.0) {
        support.extend((0..n).filter(|&k| mu[k] > 0.0));
        mu.iter_mut().for_each(|m| *m /= total);
    } else {
        let phi = |k: usize| {
            kn.point(k).iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * tau) + kn.costs[k]
        };
        let start = (0..n).min_by(|&a, &b| phi(a).total_cmp(&phi(b))).expect("knot set is not empty");
        mu.iter_mut().for_each(|m| *m = 0.0);
        mu[start] = 1.0;
        support.push(start);
    }
    let mut resid = vec![0.0; l];
    let mut grad = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let cap = 50 + 20 * n;
    // A warm support is generally not at its affine minimizer yet.
    let mut minor_needed = support.len() > 1;
    while iterations < cap {
        iterations += 1;
        out.iter_mut().for_each(|x| *x = 0.0);
        for &k in &support {
            for (x, p) in out.iter_mut().zip(kn.point(k)) {
                *x += mu[k] * p;
            }
        }
        for i in 0..l {
            resid[i] = (out[i] - u[i]) / tau;
        }
        for k in 0..n {
            grad[k] = dot(kn.point(k), &resid) + kn.costs[k];
        }
        let mean: f64 = support.iter().map(|&k| mu[k] * grad[k]).sum();
        let (kmin, gmin) = (0..n).map(|k| (k, grad[k])).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        gap = (mean - gmin).max(0.0);
        let r = *support.iter().max_by(|&&a, &&b| mu[a].total_cmp(&mu[b])).unwrap();
        let free: Vec<usize> = support.iter().copied().filter(|&k| k != r).collect();
        let m = free.len();

        if !minor_needed {
            if gap <= roundoff_floor(&grad, u, tau) || support.contains(&kmin) {
                break;
            }
            // Add the most violating knot. If it is affinely dependent on the
            // support, trade it in along a direction that keeps w fixed.
            let norm2 = kn.gram(kmin, kmin, r);
            let dependent = if m == 0 {
                (norm2 <= 1e-24).then(Vec::new)
            } else {
                let mut sys = vec![0.0; m * m];
                for a in 0..m {
                    for b in 0..=a {
                        let v = kn.gram(free[a], free[b], r);
                        sys[a * m + b] = v;
                        sys[b * m + a] = v;
                    }
                }
                let proj: Vec<f64> = free.iter().map(|&a| kn.gram(a, kmin, r)).collect();
                let mut rhs = proj.clone();
                super::solve_spd(&mut sys, &mut rhs, m).filter(|z| norm2 - dot(z, &proj) <= 1e-12 * norm2.max(1e-300))
            };
            if let Some(z) = dependent {
                let mut d = vec![0.0; n];
                d[kmin] = 1.0;
                for (a, &k) in free.iter().enumerate() {
                    d[k] = -z[a];
                }
                d[r] = -(1.0 - z.iter().sum::<f64>());
                let mut t = f64::INFINITY;
                let mut block = None;
                for &k in &support {
                    if d[k] < 0.0 && mu[k] / -d[k] < t {
                        t = mu[k] / -d[k];
                        block = Some(k);
                    }
                }
                let Some(b) = block else {
                    return Err(Error::Numeric("knot exchange without a blocking weight".into()));
                };
                for &k in support.iter().chain(std::iter::once(&kmin)) {
                    mu[k] = (mu[k] + t * d[k]).max(0.0);
                }
                mu[b] = 0.0;
                support.retain(|&k| k != b);
            }
            support.push(kmin);
            minor_needed = true;
            continue;
        }

        // Minor cycle: move toward the affine minimizer over the support.
        minor_needed = false;
        if m == 0 {
            continue;
        }
        let mut sys = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..=a {
                let v = kn.gram(free[a], free[b], r) / tau;
                sys[a * m + b] = v;
                sys[b * m + a] = v;
            }
        }
        let mut rhs: Vec<f64> = free.iter().map(|&a| grad[r] - grad[a]).collect();
        let Some(delta) = super::solve_spd(&mut sys, &mut rhs, m) else {
            return Err(Error::Numeric("singular knot system".into()));
        };
        let mut dr = 0.0;
        let mut t = 1.0;
        let mut block = None;
        for (a, &k) in free.iter().enumerate() {
            dr -= delta[a];
            if mu[k] + delta[a] < 0.0 {
                let s = mu[k] / -delta[a];
                if s < t {
                    t = s;
                    block = Some(k);
                }
            }
        }
        if mu[r] + dr < 0.0 && mu[r] / -dr < t {
            t = mu[r] / -dr;
            block = Some(r);
        }
        for (a, &k) in free.iter().enumerate() {
            mu[k] = (mu[k] + t * delta[a]).max(0.0);
        }
        mu[r] = (mu[r] + t * dr).max(0.0);
        if let Some(b) = block {
            mu[b] = 0.0;
            minor_needed = true;
        }
        support.retain(|&k| mu[k] > 0.0);
        let s: f64 = support.iter().map(|&k| mu[k]).sum();
        support.iter().for_each(|&k| mu[k] /= s);
    }
    if 2.0 * tau * gap > 1e-16 && gap > 10.0 * roundoff_floor(&grad, u, tau) {
        return Err(Error::Numeric(format!(
            "knot prox did not converge: gap {gap:.3e} after {iterations} iterations (u = {u:?}, tau = {tau})"
        )));
    }
    Ok(ProxReport { gap, iterations })
}
