//! Proximal operator of the lifted envelope.
//!
//! `prox(u) = argmin_w |w - u|^2 / (2 tau) + rho**(w)` is solved through the
//! mixture weights `lambda` (a point of the probability simplex over the
//! intervals). For fixed weights each interval's position `alpha_j` is a
//! closed-form 1D problem and the lifted point is
//! `w_j = sum_{k>j} lambda_k + lambda_j alpha_j`. The reduced objective
//! `F(lambda)` is convex with gradient `-g` where
//! `g_k = <p_k(alpha_k), v> - hull_k(alpha_k)`, `v = (u - w)/tau`, and
//! `max_k g_k - sum_k lambda_k g_k` is exactly the primal-dual gap. An
//! active-set Newton method over the simplex drives that gap to roundoff.

use super::envelope::EnvelopeModel;
use crate::error::{Error, Result};

const MAX_ITERS: usize = 100;

/// Result of one prox evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxReport {
    /// Primal-dual gap of the returned point.
    pub gap: f64,
    pub iterations: usize,
}

/// `argmin_w |w - u|^2 / (2 tau) + rho**(w)`.
pub fn envelope_prox(env: &EnvelopeModel, u: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut state = vec![0.0; env.prox_state_len()];
    init_state(env, u, &mut state);
    let mut out = vec![0.0; env.intervals()];
    prox_warm(env, u, tau, &mut state, &mut out)?;
    Ok(out)
}

/// Cold warm-start state for [`prox_warm`], of length `env.prox_state_len()`.
pub(crate) fn init_state(env: &EnvelopeModel, u: &[f64], state: &mut [f64]) {
    if env.is_quadratic() {
        cold_start(u, state);
    } else {
        state.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Initial mixture weights from the vertex weights of `u` projected
/// coordinate-wise into the domain.
fn cold_start(u: &[f64], weights: &mut [f64]) {
    let l = u.len();
    let mut prev = 1.0f64;
    let mut ys = vec![0.0; l];
    for (y, &x) in ys.iter_mut().zip(u) {
        *y = x.clamp(0.0, 1.0).min(prev);
        prev = *y;
    }
    weights.iter_mut().for_each(|w| *w = 0.0);
    weights[0] = 1.0 - ys[0];
    for j in 0..l {
        let next = if j + 1 < l { ys[j + 1] } else { 0.0 };
        weights[j] += ys[j] - next;
    }
}

struct Eval {
    alpha: Vec<f64>,
    stiff: Vec<f64>,
    w: Vec<f64>,
    g: Vec<f64>,
    f: f64,
}

impl Eval {
    fn new(l: usize) -> Self {
        Self {
            alpha: vec![0.0; l],
            stiff: vec![0.0; l],
            w: vec![0.0; l],
            g: vec![0.0; l],
            f: 0.0,
        }
    }
}

fn evaluate(env: &EnvelopeModel, u: &[f64], tau: f64, lam: &[f64], e: &mut Eval) {
    let l = lam.len();
    let mut tail = 0.0;
    let mut f = 0.0;
    let mut rho = [0.0f64; 64];
    let mut v = [0.0f64; 64];
    for j in (0..l).rev() {
        let t = (u[j] - tail) / tau;
        let inner = env.hulls[j].inner(lam[j] / tau, t);
        let w = tail + lam[j] * inner.alpha;
        e.alpha[j] = inner.alpha;
        e.stiff[j] = inner.stiffness;
        e.w[j] = w;
        rho[j] = env.hulls[j].value(inner.alpha);
        v[j] = (u[j] - w) / tau;
        f += (w - u[j]) * (w - u[j]) / (2.0 * tau) + lam[j] * rho[j];
        tail += lam[j];
    }
    let mut head = 0.0;
    for k in 0..l {
        e.g[k] = head + e.alpha[k] * v[k] - rho[k];
        head += v[k];
    }
    e.f = f;
}

fn gap_of(e: &Eval, lam: &[f64]) -> f64 {
    let gmax = e.g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean: f64 = e.g.iter().zip(lam).map(|(g, l)| g * l).sum();
    (gmax - mean).max(0.0)
}

/// Prox with warm-started mixture weights; writes the result into `out` and
/// leaves the final weights in `weights`.
pub(crate) fn prox_warm(
    env: &EnvelopeModel,
    u: &[f64],
    tau: f64,
    weights: &mut [f64],
    out: &mut [f64],
) -> Result<ProxReport> {
    let l = env.intervals();
    if l > 64 {
        return Err(Error::Unsupported(format!("{l} intervals (max 64)")));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("prox step must be positive, got {tau}")));
    }
    if let Some(knots) = &env.knots {
        return super::knot_qp::prox_knots(knots, u, tau, weights, out);
    }
    let mut e = Eval::new(l);
    let mut trial_e = Eval::new(l);
    let mut lam = weights.to_vec();
    let mut trial = vec![0.0; l];
    evaluate(env, u, tau, &lam, &mut e);
    let mut iterations = 0;
    let mut gap = gap_of(&e, &lam);
    let mut stalled = 0;
    while iterations < MAX_ITERS {
        if gap <= roundoff_floor(&e, tau) || 2.0 * tau * gap <= 1e-24 {
            break;
        }
        iterations += 1;
        let dir = newton_direction(&e, &lam, tau)
            .filter(|d| directional(&e, d) < 0.0)
            .unwrap_or_else(|| frank_wolfe_direction(&e, &lam));
        let slope = directional(&e, &dir);
        if !(slope < 0.0) {
            break;
        }
        // Largest step keeping the weights non-negative.
        let mut t_max = f64::INFINITY;
        let mut blocking = None;
        for k in 0..l {
            if dir[k] < 0.0 {
                let t = lam[k] / -dir[k];
                if t < t_max {
                    t_max = t;
                    blocking = Some(k);
                }
            }
        }
        let mut t = t_max.min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..l {
                trial[k] = (lam[k] + t * dir[k]).max(0.0);
            }
            if t == t_max {
                if let Some(k) = blocking {
                    trial[k] = 0.0;
                }
            }
            let s: f64 = trial.iter().sum();
            trial.iter_mut().for_each(|x| *x /= s);
            evaluate(env, u, tau, &trial, &mut trial_e);
            // Once the predicted decrease drops below the resolution of f,
            // the gap takes over as merit function.
            let resolvable = -t * slope > 1e-13 * (1.0 + e.f.abs());
            let boundary = t == t_max && trial_e.f <= e.f + 1e-13 * (1.0 + e.f.abs());
            let ok = if boundary {
                true
            } else if resolvable {
                trial_e.f <= e.f + 1e-4 * t * slope
            } else {
                gap_of(&trial_e, &trial) < gap
            };
            if ok {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            stalled += 1;
            if stalled > 2 {
                break;
            }
            continue;
        }
        let previous = gap;
        let decrease = e.f - trial_e.f;
        lam.copy_from_slice(&trial);
        std::mem::swap(&mut e, &mut trial_e);
        gap = gap_of(&e, &lam);
        if decrease <= 1e-15 * (1.0 + e.f.abs()) && gap > 0.99 * previous {
            stalled += 1;
            if stalled > 2 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    // Strong convexity bounds the argument error by sqrt(2 tau gap); below
    // the roundoff floor of the gap no better certificate is available.
    if 2.0 * tau * gap > 1e-16 && gap > 10.0 * roundoff_floor(&e, tau) {
        return Err(Error::Numeric(format!(
            "envelope prox did not converge: gap {gap:.3e} after {iterations} iterations (u = {u:?}, tau = {tau})"
        )));
    }
    out.copy_from_slice(&e.w);
    weights.copy_from_slice(&lam);
    Ok(ProxReport { gap, iterations })
}

/// Size of the gap attributable to rounding in `g` (which carries `1/tau`).
fn roundoff_floor(e: &Eval, tau: f64) -> f64 {
    let scale = 1.0 + e.g.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    1e-14 * (scale + e.g.len() as f64 / tau)
}

fn directional(e: &Eval, dir: &[f64]) -> f64 {
    -e.g.iter().zip(dir).map(|(g, d)| g * d).sum::<f64>()
}

fn frank_wolfe_direction(e: &Eval, lam: &[f64]) -> Vec<f64> {
    let best = (0..lam.len())
        .max_by(|&a, &b| e.g[a].total_cmp(&e.g[b]))
        .unwrap_or(0);
    let mut d: Vec<f64> = lam.iter().map(|x| -x).collect();
    d[best] += 1.0;
    d
}

/// Equality-constrained Newton step on the working set (support plus the
/// most violating interval), in null-space coordinates `d = Z y` with
/// `Z = [e_i - e_ref]`. The reduced Hessian is assembled as `(PZ)^T S (PZ)`
/// so the large `1/tau` curvature along the simplex normal never appears.
fn newton_direction(e: &Eval, lam: &[f64], tau: f64) -> Option<Vec<f64>> {
    let l = lam.len();
    let p = |j: usize, k: usize| -> f64 {
        if j < k {
            1.0
        } else if j == k {
            e.alpha[k]
        } else {
            0.0
        }
    };
    let best = (0..l).max_by(|&a, &b| e.g[a].total_cmp(&e.g[b]))?;
    let mut working: Vec<usize> = (0..l).filter(|&k| lam[k] > 0.0 || k == best).collect();
    loop {
        if working.len() < 2 {
            return None;
        }
        let reference = *working
            .iter()
            .max_by(|&&a, &&b| lam[a].total_cmp(&lam[b]))
            .unwrap();
        let free: Vec<usize> = working.iter().copied().filter(|&k| k != reference).collect();
        let m = free.len();
        let cols: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| (0..l).map(|j| p(j, i) - p(j, reference)).collect())
            .collect();
        let mut sys = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        let mut diag_max = 0.0f64;
        for a in 0..m {
            for b in 0..=a {
                let h: f64 = (0..l).map(|j| e.stiff[j] * cols[a][j] * cols[b][j]).sum::<f64>() / tau;
                sys[a * m + b] = h;
                sys[b * m + a] = h;
            }
            diag_max = diag_max.max(sys[a * m + a]);
            rhs[a] = e.g[free[a]] - e.g[reference];
        }
        // Levenberg shift: vanishes with the reduced gradient, and bounds the
        // step along flat (piecewise-linear) directions.
        let reg = rhs.iter().fold(0.0f64, |m, r| m.max(r.abs())) + 1e-13 * diag_max + 1e-300;
        for a in 0..m {
            sys[a * m + a] += reg;
        }
        let y = super::solve_spd(&mut sys, &mut rhs, m)?;
        let mut d = vec![0.0; l];
        for (a, &k) in free.iter().enumerate() {
            d[k] = y[a];
            d[reference] -= y[a];
        }
        // Drop zero-weight members that the step would push negative.
        let before = working.len();
        working.retain(|&k| !(lam[k] <= 0.0 && d[k] < 0.0));
        if working.len() == before {
            return Some(d);
        }
    }
}
