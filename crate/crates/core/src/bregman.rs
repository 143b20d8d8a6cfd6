//! Classical and lifted Bregman iterations.

use crate::dataterms::ModelField;
use crate::error::{Error, Result};
use crate::grid::{divergence_adjoint, DualField, LiftedField, ScalarField};
use crate::lifting::transform::source_rows;
use crate::lifting::{check_sublabel_integral, transform_dual_columns, unlift, LabelSet, TvKind};
use crate::solver::{lifted_energy, rof_energy, solve_lifted_step, solve_unlifted_rof, total_variation, SaddleState, SolverConfig};

/// What to do when lifted iterates are not sublabel-integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonIntegralPolicy {
    /// Unlift anyway and skip the transform at those pixels.
    UnliftAndContinue,
    /// Stop once more than half of the pixels are non-integral.
    Abort,
}

impl std::str::FromStr for NonIntegralPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "continue" | "unlift_and_continue" => Ok(Self::UnliftAndContinue),
            "abort" => Ok(Self::Abort),
            _ => Err(format!("unknown policy '{s}' (expected continue or abort)")),
        }
    }
}

impl NonIntegralPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::UnliftAndContinue => "continue",
            Self::Abort => "abort",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BregmanConfig {
    pub steps: usize,
    pub tv: TvKind,
    pub transform_subgradients: bool,
    pub solver: SolverConfig,
    /// Max-norm distance below which a lifted pixel counts as sublabel-integral.
    pub integrality_tol: f64,
    pub non_integral_policy: NonIntegralPolicy,
    /// Unlifted forward differences below this count as flat when picking
    /// the transform's source row at label values.
    pub flat_tol: f64,
}

impl Default for BregmanConfig {
    fn default() -> Self {
        Self {
            steps: 5,
            tv: TvKind::An,
            transform_subgradients: true,
            solver: SolverConfig::default(),
            integrality_tol: 1e-3,
            non_integral_policy: NonIntegralPolicy::UnliftAndContinue,
            flat_tol: 1e-6,
        }
    }
}

impl BregmanConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("need at least one Bregman step".into()));
        }
        if !(self.integrality_tol > 0.0) || !(self.flat_tol >= 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub energy: f64,
    /// `|u_k - f|_2`, when a reference image is known.
    pub data_residual: Option<f64>,
    /// `TV^h` of the (unlifted) iterate.
    pub tv: f64,
    pub non_integral_fraction: f64,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct BregmanStep {
    /// Scalar iterate; the unlifted one on the lifted path.
    pub u: ScalarField,
    pub lifted: Option<LiftedField>,
    /// Dual used for the next step (transformed where applicable).
    pub q: DualField,
    /// Subgradient `p_k`; one channel on the classical path.
    pub p: LiftedField,
    pub metrics: StepMetrics,
}

#[derive(Clone, Debug, Default)]
pub struct BregmanTrace {
    pub steps: Vec<BregmanStep>,
}

impl BregmanTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn iterates(&self) -> impl Iterator<Item = &ScalarField> {
        self.steps.iter().map(|s| &s.u)
    }

    pub fn last(&self) -> Option<&BregmanStep> {
        self.steps.last()
    }

    /// Fills `data_residual` with `|u_k - f|_2`.
    pub fn set_reference(&mut self, f: &ScalarField) {
        for s in &mut self.steps {
            let r: f64 = s.u.values().iter().zip(f.values()).map(|(a, b)| (a - b) * (a - b)).sum();
            s.metrics.data_residual = Some(r.sqrt());
        }
    }
}

/// Alg. for ROF: `u_k = argmin lambda/2 |u - f|^2 + TV(u) - <p_{k-1}, u>`,
/// `p_k = p_{k-1} - lambda (u_k - f)`.
pub fn classical_bregman_rof(f: &ScalarField, lambda: f64, config: &BregmanConfig) -> Result<BregmanTrace> {
    config.validate()?;
    let shape = f.shape();
    let mut p = ScalarField::zeros(shape);
    let mut warm: Option<SaddleState> = None;
    let mut trace = BregmanTrace::default();
    for _ in 0..config.steps {
        let sol = solve_unlifted_rof(f, lambda, &p, config.tv, &config.solver, warm.take())?;
        let u = sol.u;
        for ((pv, uv), fv) in p.values_mut().iter_mut().zip(u.values()).zip(f.values()) {
            *pv -= lambda * (uv - fv);
        }
        let metrics = StepMetrics {
            energy: rof_energy(&u, f, lambda, config.tv),
            data_residual: None,
            tv: total_variation(&u, config.tv),
            non_integral_fraction: 0.0,
            solver_iterations: sol.diagnostics.iterations,
            solver_residual: sol.diagnostics.residual,
            converged: sol.diagnostics.converged,
        };
        trace.steps.push(BregmanStep {
            u,
            lifted: None,
            q: sol.q,
            p: p.to_lifted(),
            metrics,
        });
        if config.solver.warm_start {
            warm = Some(sol.state);
        }
    }
    trace.set_reference(f);
    Ok(trace)
}

/// Lifted iteration: each step solves the lifted saddle problem shifted by
/// the previous dual, then takes `p_k = grad^T q_k` (after the optional
/// transform of `q_k`).
pub fn lifted_bregman(model: &ModelField, labels: &LabelSet, config: &BregmanConfig) -> Result<BregmanTrace> {
    config.validate()?;
    let shape = model.shape();
    let l = labels.intervals();
    if model.intervals() != l {
        return Err(Error::Model(format!("model has {} intervals, labels {l}", model.intervals())));
    }
    let envs = model.envelopes(labels)?;
    let dims = shape.dims();
    let mut q_offset = DualField::zeros(shape, l);
    let mut warm: Option<SaddleState> = None;
    let mut trace = BregmanTrace::default();
    for k in 1..=config.steps {
        let sol = solve_lifted_step(&envs, labels, config.tv, &q_offset, &config.solver, warm.take())?;
        let u = unlift_field(&sol.u, labels);
        let integral: Vec<_> = sol
            .u
            .pixels()
            .map(|px| check_sublabel_integral(px, config.integrality_tol))
            .collect();
        let fraction = integral.iter().filter(|i| i.is_none()).count() as f64 / shape.len() as f64;
        if config.non_integral_policy == NonIntegralPolicy::Abort && fraction > 0.5 {
            return Err(Error::NonIntegral { step: k, fraction });
        }
        let mut q = sol.q.clone();
        if config.transform_subgradients {
            let mut diff = vec![0.0; dims];
            for (p, idx) in integral.iter().enumerate() {
                let Some(idx) = *idx else { continue };
                for (axis, d) in diff.iter_mut().enumerate() {
                    *d = shape.forward(p, axis).map_or(0.0, |n| u.values()[n] - u.values()[p]);
                }
                let rows = source_rows(idx, &diff, config.tv, l, config.integrality_tol, config.flat_tol);
                let t = transform_dual_columns(q.pixel(p), dims, &rows, labels);
                q.pixel_mut(p).copy_from_slice(&t);
            }
        }
        let p = extract_subgradient(&q);
        let metrics = StepMetrics {
            energy: lifted_energy(&sol.u, &envs, labels, config.tv),
            data_residual: None,
            tv: total_variation(&u, config.tv),
            non_integral_fraction: fraction,
            solver_iterations: sol.diagnostics.iterations,
            solver_residual: sol.diagnostics.residual,
            converged: sol.diagnostics.converged,
        };
        trace.steps.push(BregmanStep {
            u,
            lifted: Some(sol.u),
            q: q.clone(),
            p,
            metrics,
        });
        q_offset = q;
        if config.solver.warm_start {
            warm = Some(sol.state);
        }
    }
    Ok(trace)
}

/// `grad^T q`.
pub fn extract_subgradient(q: &DualField) -> LiftedField {
    divergence_adjoint(q)
}

/// Pixel-wise unlifting, applied to every pixel whether integral or not.
pub fn unlift_field(u: &LiftedField, labels: &LabelSet) -> ScalarField {
    let values = u.pixels().map(|px| unlift(px, labels)).collect();
    ScalarField::new(u.shape(), values).expect("unlifted values match the grid")
}

/// Fraction of pixels that are not within `tol` of a sublabel-integral vector.
pub fn non_integral_fraction(u: &LiftedField, tol: f64) -> f64 {
    let bad = u.pixels().filter(|px| check_sublabel_integral(px, tol).is_none()).count();
    bad as f64 / u.shape().len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;

    #[test]
    fn unlift_of_mixed_pixel() {
        let labels = LabelSet::new(vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let u = LiftedField::new(GridShape::line(1).unwrap(), 3, vec![1.0, 0.5, 0.5]).unwrap();
        assert_eq!(unlift_field(&u, &labels).values(), &[0.625]);
        assert_eq!(non_integral_fraction(&u, 1e-3), 1.0);
    }

    #[test]
    fn zero_dual_has_zero_subgradient() {
        let q = DualField::zeros(GridShape::new(3, 4).unwrap(), 2);
        assert!(extract_subgradient(&q).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [NonIntegralPolicy::UnliftAndContinue, NonIntegralPolicy::Abort] {
            assert_eq!(p.name().parse::<NonIntegralPolicy>().unwrap(), p);
        }
    }
}
