//! Primal-dual hybrid gradient solver for the lifted saddle problem and for
//! scalar TV-ROF.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{adjoint_raw, gradient_raw, DualField, GridShape, LiftedField, ScalarField};
use crate::lifting::prox::{init_state, prox_warm};
use crate::lifting::{EnvelopeModel, LabelSet, TvKind};

/// PDHG parameters. `tau`/`sigma` of `None` select `r / |grad|` and
/// `1 / (r |grad|)` with `r = step_ratio`, `|grad| = 2 sqrt(d) / h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Threshold on the RMS (per pixel) primal-dual residual.
    pub tol: f64,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    /// Primal over dual step size for the automatic choice.
    pub step_ratio: f64,
    pub theta: f64,
    pub check_every: usize,
    /// Reuse the previous saddle point when a warm start is supplied.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol: 1e-6,
            tau: None,
            sigma: None,
            step_ratio: 1.0,
            theta: 1.0,
            check_every: 10,
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_step_ratio(mut self, ratio: f64) -> Self {
        self.step_ratio = ratio;
        self
    }

    /// Checks the configuration and resolves the step sizes for `shape`.
    pub fn steps(&self, shape: &GridShape) -> Result<(f64, f64)> {
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::Config("max_iters and check_every must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.step_ratio > 0.0 && self.step_ratio.is_finite()) {
            return Err(Error::Config(format!("step ratio must be positive, got {}", self.step_ratio)));
        }
        let bound = shape.gradient_norm_sq_bound();
        let norm = bound.sqrt();
        let tau = self.tau.unwrap_or(self.step_ratio / norm);
        let sigma = self.sigma.unwrap_or(1.0 / (self.step_ratio * norm));
        if !(tau > 0.0 && sigma > 0.0) {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        if tau * sigma * bound > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "tau * sigma * |grad|^2 = {} exceeds 1",
                tau * sigma * bound
            )));
        }
        Ok((tau, sigma))
    }
}

/// Iterates of the saddle-point solver, reusable as a warm start.
#[derive(Clone, Debug)]
pub struct SaddleState {
    pub u: LiftedField,
    pub u_bar: LiftedField,
    pub q: DualField,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// Warm-start state of the per-pixel envelope prox (lifted solves only),
    /// concatenated over pixels.
    pub prox_state: Vec<f64>,
}

impl SaddleState {
    fn fresh(u: LiftedField, rows: usize) -> Self {
        let q = DualField::zeros(u.shape(), rows);
        Self {
            u_bar: u.clone(),
            u,
            q,
            iterations: 0,
            residuals: Vec::new(),
            prox_state: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Objective including the linear offset term.
    pub energy: f64,
    /// Residuals recorded every `check_every` iterations.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LiftedSolution {
    pub u: LiftedField,
    pub q: DualField,
    pub diagnostics: SolveDiagnostics,
    pub state: SaddleState,
}

#[derive(Clone, Debug)]
pub struct ScalarSolution {
    pub u: ScalarField,
    pub q: DualField,
    pub diagnostics: SolveDiagnostics,
    pub state: SaddleState,
}

struct Outcome {
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Generic PDHG loop on `min_u G(u) + <K u, q> - delta(q)` with `K` the
/// forward-difference gradient. `prox` maps `v` to `prox_{tau G}(v)`.
fn pdhg(
    shape: &GridShape,
    channels: usize,
    state: &mut SaddleState,
    cfg: &SolverConfig,
    tau: f64,
    sigma: f64,
    mut prox: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    project: impl Fn(&mut [f64]),
) -> Result<Outcome> {
    let n = shape.len() * channels;
    let m = n * shape.dims();
    let mut u_new = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut kt_q = vec![0.0; n];
    let mut kt_q_new = vec![0.0; n];
    let mut grad = vec![0.0; m];
    let mut q_new = vec![0.0; m];
    let mut du = vec![0.0; n];
    adjoint_raw(shape, channels, state.q.values(), &mut kt_q);
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        let u = state.u.values();
        for k in 0..n {
            v[k] = u[k] - tau * kt_q[k];
        }
        prox(&v, &mut u_new)?;
        {
            let u_bar = state.u_bar.values_mut();
            for k in 0..n {
                u_bar[k] = u_new[k] + cfg.theta * (u_new[k] - u[k]);
            }
        }
        gradient_raw(shape, channels, state.u_bar.values(), &mut grad);
        let q = state.q.values();
        for k in 0..m {
            q_new[k] = q[k] + sigma * grad[k];
        }
        project(&mut q_new);
        adjoint_raw(shape, channels, &q_new, &mut kt_q_new);

        let check = it % cfg.check_every == 0 || it == cfg.max_iters;
        if check {
            let mut primal = 0.0;
            for k in 0..n {
                let r = (u[k] - u_new[k]) / tau - (kt_q[k] - kt_q_new[k]);
                primal += r * r;
                du[k] = state.u_bar.values()[k] - u_new[k];
            }
            // grad(u_bar - u_new), reusing the gradient buffer.
            gradient_raw(shape, channels, &du, &mut grad);
            let mut dual = 0.0;
            for k in 0..m {
                let r = (q[k] - q_new[k]) / sigma + grad[k];
                dual += r * r;
            }
            residual = ((primal + dual) / shape.len() as f64).sqrt();
            if !residual.is_finite() {
                return Err(Error::Numeric(format!("non-finite residual at iteration {it}")));
            }
            state.residuals.push(residual);
        }
        state.u.values_mut().copy_from_slice(&u_new);
        state.q.values_mut().copy_from_slice(&q_new);
        std::mem::swap(&mut kt_q, &mut kt_q_new);
        state.iterations += 1;
        if check && residual <= cfg.tol {
            return Ok(Outcome {
                iterations: it,
                residual,
                converged: true,
            });
        }
    }
    Ok(Outcome {
        iterations: cfg.max_iters,
        residual,
        converged: false,
    })
}

fn project_field(q: &mut [f64], tv: TvKind, dims: usize, widths: &[f64]) {
    let block = widths.len() * dims;
    q.par_chunks_mut(block)
        .for_each(|px| tv.project(px, dims, widths));
}

/// One lifted subproblem: approximately solves
/// `min_u max_{q in K} sum_x rho**(x, u(x)) + <q - q_offset, grad u>`.
pub fn solve_lifted_step(
    envs: &[EnvelopeModel],
    labels: &LabelSet,
    tv: TvKind,
    q_offset: &DualField,
    config: &SolverConfig,
    warm_start: Option<SaddleState>,
) -> Result<LiftedSolution> {
    let shape = q_offset.shape();
    let l = labels.intervals();
    if envs.len() != shape.len() {
        return Err(Error::Shape(format!("{} envelopes for {} pixels", envs.len(), shape.len())));
    }
    if q_offset.rows() != l || envs.iter().any(|e| e.intervals() != l) {
        return Err(Error::Shape("envelopes, labels and offset disagree on intervals".into()));
    }
    let (tau, sigma) = config.steps(&shape)?;
    let mut state = match warm_start {
        Some(s) if config.warm_start && s.u.shape() == shape && s.u.channels() == l => s,
        _ => {
            // Start from the lifted label midpoint.
            let mid = LiftedField::broadcast(shape, &vec![0.5; l]);
            SaddleState::fresh(mid, l)
        }
    };
    state.residuals.clear();
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(envs.iter().scan(0, |acc, e| {
            *acc += e.prox_state_len();
            Some(*acc)
        }))
        .collect();
    if state.prox_state.len() != offsets[shape.len()] {
        state.prox_state = vec![0.0; offsets[shape.len()]];
        for (p, env) in envs.iter().enumerate() {
            init_state(env, state.u.pixel(p), &mut state.prox_state[offsets[p]..offsets[p + 1]]);
        }
    }
    let mut p_offset = vec![0.0; shape.len() * l];
    adjoint_raw(&shape, l, q_offset.values(), &mut p_offset);
    let widths = labels.widths().to_vec();
    let dims = shape.dims();
    let mut prox_state = std::mem::take(&mut state.prox_state);
    let mut shifted = vec![0.0; shape.len() * l];
    let outcome = pdhg(
        &shape,
        l,
        &mut state,
        config,
        tau,
        sigma,
        |v, out| {
            for k in 0..v.len() {
                shifted[k] = v[k] + tau * p_offset[k];
            }
            let mut slots = Vec::with_capacity(envs.len());
            let mut rest = prox_state.as_mut_slice();
            for env in envs {
                let (head, tail) = rest.split_at_mut(env.prox_state_len());
                slots.push(head);
                rest = tail;
            }
            out.par_chunks_mut(l)
                .zip(shifted.par_chunks(l))
                .zip(slots.par_iter_mut())
                .zip(envs.par_iter())
                .try_for_each(|(((o, x), w), env)| prox_warm(env, x, tau, w, o).map(|_| ()))
        },
        |q| project_field(q, tv, dims, &widths),
    );
    state.prox_state = prox_state;
    let outcome = outcome?;
    let energy = lifted_energy(&state.u, envs, labels, tv) - crate::grid::dot(state.u.values(), &p_offset);
    let diagnostics = SolveDiagnostics {
        iterations: outcome.iterations,
        residual: outcome.residual,
        converged: outcome.converged,
        energy,
        residual_history: state.residuals.clone(),
    };
    Ok(LiftedSolution {
        u: state.u.clone(),
        q: state.q.clone(),
        diagnostics,
        state,
    })
}

/// Scalar ROF with a linear offset:
/// `min_u sum_x lambda/2 (u - f)^2 + TV(u) - <p_offset, u>`.
pub fn solve_unlifted_rof(
    f: &ScalarField,
    lambda: f64,
    p_offset: &ScalarField,
    tv: TvKind,
    config: &SolverConfig,
    warm_start: Option<SaddleState>,
) -> Result<ScalarSolution> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let shape = f.shape();
    if p_offset.shape() != shape {
        return Err(Error::Shape("offset and data differ in shape".into()));
    }
    let (tau, sigma) = config.steps(&shape)?;
    let mut state = match warm_start {
        Some(s) if config.warm_start && s.u.shape() == shape && s.u.channels() == 1 => s,
        _ => SaddleState::fresh(f.to_lifted(), 1),
    };
    state.residuals.clear();
    let dims = shape.dims();
    let (fv, pv) = (f.values(), p_offset.values());
    let outcome = pdhg(
        &shape,
        1,
        &mut state,
        config,
        tau,
        sigma,
        |v, out| {
            let s = tau * lambda;
            for k in 0..v.len() {
                out[k] = (v[k] + s * fv[k] + tau * pv[k]) / (1.0 + s);
            }
            Ok(())
        },
        |q| project_field(q, tv, dims, &[1.0]),
    )?;
    let u = state.u.to_scalar()?;
    let energy = rof_energy(&u, f, lambda, tv) - crate::grid::dot(u.values(), pv);
    let diagnostics = SolveDiagnostics {
        iterations: outcome.iterations,
        residual: outcome.residual,
        converged: outcome.converged,
        energy,
        residual_history: state.residuals.clone(),
    };
    Ok(ScalarSolution {
        u,
        q: state.q.clone(),
        diagnostics,
        state,
    })
}

/// Lifted TV: `sum_x sup_{q in K} <q, grad u(x)>`.
pub fn lifted_tv(u: &LiftedField, labels: &LabelSet, tv: TvKind) -> f64 {
    let shape = u.shape();
    let l = u.channels();
    let dims = shape.dims();
    let mut g = vec![0.0; u.values().len() * dims];
    gradient_raw(&shape, l, u.values(), &mut g);
    g.chunks_exact(l * dims)
        .map(|px| tv.support(px, dims, labels.widths()))
        .sum()
}

/// Discretized lifted energy; `+inf` if a pixel leaves the lifted domain.
pub fn lifted_energy(u: &LiftedField, envs: &[EnvelopeModel], labels: &LabelSet, tv: TvKind) -> f64 {
    let data: Vec<f64> = u
        .values()
        .par_chunks(u.channels())
        .zip(envs.par_iter())
        .map(|(px, env)| env.eval(px))
        .collect();
    data.iter().sum::<f64>() + lifted_tv(u, labels, tv)
}

/// Scalar total variation `TV^h(u)`.
pub fn total_variation(u: &ScalarField, tv: TvKind) -> f64 {
    let shape = u.shape();
    let dims = shape.dims();
    let mut g = vec![0.0; shape.len() * dims];
    gradient_raw(&shape, 1, u.values(), &mut g);
    g.chunks_exact(dims).map(|px| tv.support(px, dims, &[1.0])).sum()
}

/// `sum_x lambda/2 (u - f)^2 + TV^h(u)`.
pub fn rof_energy(u: &ScalarField, f: &ScalarField, lambda: f64, tv: TvKind) -> f64 {
    let data: f64 = u
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| 0.5 * lambda * (a - b) * (a - b))
        .sum();
    data + total_variation(u, tv)
}
