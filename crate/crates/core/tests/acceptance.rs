//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line; exits nonzero on failure.

use std::time::Instant;

use isslift::bregman::{classical_bregman_rof, lifted_bregman, unlift_field, BregmanConfig, BregmanTrace};
use isslift::dataterms::{bundled_two_squares, rof_model, stereo_model, synthetic_stereo_pair, StereoConfig};
use isslift::grid::{scalar_adjoint, DualField, GridShape, ScalarField};
use isslift::lifting::{build_envelope, envelope_prox, LabelSet, Piece, PieceModel, TvKind};
use isslift::oracles::{grid_prox_oracle, taut_string_tv1d, EnvelopeOracle, GridOracleConfig};
use isslift::selftest::{dual_structure_deviation, random_integral_field};
use isslift::solver::{solve_lifted_step, total_variation, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rof_config(transform: bool, tol: f64, tv: TvKind) -> BregmanConfig {
    BregmanConfig {
        steps: 5,
        tv,
        transform_subgradients: transform,
        solver: SolverConfig::default().with_tol(tol).with_max_iters(200_000),
        ..BregmanConfig::default()
    }
}

fn max_diffs(a: &BregmanTrace, b: &BregmanTrace) -> Vec<f64> {
    a.iterates().zip(b.iterates()).map(|(x, y)| x.max_abs_diff(y)).collect()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Runs shared by criteria 1, 2, 8 and 11.
struct RofRuns {
    classical: BregmanTrace,
    transformed: BregmanTrace,
}

fn rof_runs() -> RofRuns {
    let img = bundled_two_squares();
    let labels = LabelSet::uniform(5, 0.0, 1.0).unwrap();
    let model = rof_model(&img, 20.0, &labels).unwrap();
    let classical = classical_bregman_rof(img.field(), 20.0, &rof_config(true, 1e-8, TvKind::An)).unwrap();
    let mut transformed = lifted_bregman(&model, &labels, &rof_config(true, 1e-8, TvKind::An)).unwrap();
    transformed.set_reference(img.field());
    RofRuns { classical, transformed }
}

fn criterion_1(r: &RofRuns) -> Outcome {
    let d = max_diffs(&r.transformed, &r.classical);
    outcome(d.len() == 5 && d.iter().all(|&x| x <= 5e-3), format!("max |unlift(u_k) - u_k| = [{}] (bound 5e-3)", fmt(&d)))
}

fn criterion_2(r: &RofRuns) -> Outcome {
    let img = bundled_two_squares();
    let labels = LabelSet::uniform(5, 0.0, 1.0).unwrap();
    let model = rof_model(&img, 20.0, &labels).unwrap();
    let plain = lifted_bregman(&model, &labels, &rof_config(false, 1e-8, TvKind::An)).unwrap();
    let d = max_diffs(&plain, &r.classical);
    outcome(d.iter().any(|&x| x > 5e-2), format!("untransformed max diffs = [{}] (need one > 5e-2)", fmt(&d)))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 64;
    let shape = GridShape::line(n).unwrap().with_spacing(1.0 / n as f64).unwrap();
    let lambda = 20.0;
    let cfg = BregmanConfig { steps: 3, ..rof_config(false, 1e-9, TvKind::An) };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let f = ScalarField::new(shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let trace = classical_bregman_rof(&f, lambda, &cfg).unwrap();
        let mut p = vec![0.0; n];
        for step in &trace.steps {
            let shifted: Vec<f64> = f.values().iter().zip(&p).map(|(a, b)| a + b / lambda).collect();
            let exact = taut_string_tv1d(&shifted, 1.0 / (lambda * shape.spacing()));
            worst = worst.max(step.u.values().iter().zip(&exact).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
            for ((pv, uv), fv) in p.iter_mut().zip(step.u.values()).zip(f.values()) {
                *pv -= lambda * (uv - fv);
            }
        }
    }
    outcome(worst <= 1e-4, format!("worst deviation from taut string over 50 signals x 3 steps = {worst:.3e} (bound 1e-4)"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 16;
    let shape = GridShape::new(n, n).unwrap().with_spacing(1.0 / n as f64).unwrap();
    let f = ScalarField::new(shape, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let lambda = 20.0;
    let cfg = BregmanConfig { steps: 3, ..rof_config(false, 1e-8, TvKind::An) };
    let trace = classical_bregman_rof(&f, lambda, &cfg).unwrap();
    let mut p = vec![0.0; n * n];
    let mut worst: f64 = 0.0;
    for step in &trace.steps {
        for ((pv, uv), fv) in p.iter_mut().zip(step.u.values()).zip(f.values()) {
            *pv -= lambda * (uv - fv);
        }
        let extracted = scalar_adjoint(&step.q).unwrap();
        worst = worst.max(extracted.values().iter().zip(&p).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
    }
    outcome(worst <= 1e-4, format!("max |grad^T q_k - p_k| over k <= 3 = {worst:.3e} (bound 1e-4)"))
}

fn random_quadratic_model(rng: &mut ChaCha8Rng, l: usize) -> PieceModel {
    PieceModel::new(
        (0..l)
            .map(|_| Piece::Quadratic { a: rng.gen_range(0.0..4.0), b: rng.gen_range(-3.0..3.0), c: rng.gen_range(-1.0..1.0) })
            .collect(),
    )
    .unwrap()
}

/// Labels starting at 0, so that the linear term `p t` lifts to `p <widths, u>`.
fn random_labels_from_zero(rng: &mut ChaCha8Rng, count: usize) -> LabelSet {
    let mut v = vec![0.0];
    for _ in 1..count {
        let last = v[v.len() - 1];
        v.push(last + rng.gen_range(0.1..1.0));
    }
    LabelSet::new(v).unwrap()
}

fn random_domain_point(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let labels = random_labels_from_zero(&mut rng, n);
        let l = labels.intervals();
        let model = random_quadratic_model(&mut rng, l);
        let p = rng.gen_range(-2.0..2.0);
        let e1 = build_envelope(&model, &labels).unwrap();
        let e2 = build_envelope(&model.minus_linear(&labels, p), &labels).unwrap();
        for _ in 0..20 {
            let u = random_domain_point(&mut rng, l);
            let lin: f64 = u.iter().zip(labels.widths()).map(|(a, w)| p * w * a).sum();
            worst = worst.max((e2.eval(&u) - e1.eval(&u) + lin).abs());
        }
    }
    outcome(worst <= 1e-8, format!("worst additivity defect over 100 models x 20 points = {worst:.3e} (bound 1e-8)"))
}

fn criterion_6() -> Outcome {
    let img = bundled_two_squares();
    let solve = |count: usize| {
        let labels = LabelSet::uniform(count, 0.0, 1.0).unwrap();
        let envs = rof_model(&img, 20.0, &labels).unwrap().envelopes(&labels).unwrap();
        let q0 = DualField::zeros(img.shape(), labels.intervals());
        let cfg = SolverConfig::default().with_tol(1e-8).with_max_iters(200_000);
        let sol = solve_lifted_step(&envs, &labels, TvKind::An, &q0, &cfg, None).unwrap();
        unlift_field(&sol.u, &labels)
    };
    let d = solve(2).max_abs_diff(&solve(9));
    outcome(d <= 1e-2, format!("max |u(L=2) - u(L=9)| = {d:.3e} (bound 1e-2)"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let labels = random_labels_from_zero(&mut rng, n);
        let n = rng.gen_range(4..40);
        let shape = GridShape::line(n).unwrap().with_spacing(1.0 / n as f64).unwrap();
        let (field, idx) = random_integral_field(&mut rng, &labels, shape);
        worst = worst.max(dual_structure_deviation(&field, &idx, &labels, &mut rng));
    }
    outcome(worst <= 1e-10, format!("worst deviation from the maximizer pattern and +-widths over 100 fields = {worst:.3e} (bound 1e-10)"))
}

fn criterion_8(r: &RofRuns) -> Outcome {
    let classical: Vec<f64> = r.classical.steps.iter().map(|s| s.metrics.data_residual.unwrap()).collect();
    let lifted: Vec<f64> = r.transformed.steps.iter().map(|s| s.metrics.data_residual.unwrap()).collect();
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    outcome(
        monotone(&classical) && monotone(&lifted),
        format!("|u_k - f|: classical [{}], lifted [{}]", fmt(&classical), fmt(&lifted)),
    )
}

fn random_sampled_model(rng: &mut ChaCha8Rng, l: usize) -> PieceModel {
    let n = rng.gen_range(2..7);
    PieceModel::new((0..l).map(|_| Piece::Sampled((0..n).map(|_| rng.gen_range(0.0..2.0)).collect())).collect()).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = GridOracleConfig { resolution: 101, samples: 2001 };
    let (mut worst_eval, mut worst_prox, mut worst_gap): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    for _ in 0..200 {
        let n = rng.gen_range(2..4);
        let labels = random_labels_from_zero(&mut rng, n);
        let l = labels.intervals();
        let model = random_quadratic_model(&mut rng, l);
        let env = build_envelope(&model, &labels).unwrap();
        let oracle = EnvelopeOracle::new(&model, &labels, &cfg).unwrap();
        let u = random_domain_point(&mut rng, l);
        worst_eval = worst_eval.max((env.eval(&u) - oracle.eval(&u)).abs());
        let x: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.3..1.3)).collect();
        let tau = rng.gen_range(0.05..1.0);
        let w = envelope_prox(&env, &x, tau).unwrap();
        let g = grid_prox_oracle(&model, &labels, &x, tau, &cfg).unwrap();
        worst_prox = worst_prox.max(w.iter().zip(&g).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
    }
    for _ in 0..200 {
        let n = rng.gen_range(2..4);
        let labels = random_labels_from_zero(&mut rng, n);
        let l = labels.intervals();
        let model = random_sampled_model(&mut rng, l);
        let env = build_envelope(&model, &labels).unwrap();
        let oracle = EnvelopeOracle::new(&model, &labels, &cfg).unwrap();
        let u = random_domain_point(&mut rng, l);
        worst_eval = worst_eval.max((env.eval(&u) - oracle.eval(&u)).abs());
        let x: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.3..1.3)).collect();
        let tau = rng.gen_range(0.05..1.0);
        let w = envelope_prox(&env, &x, tau).unwrap();
        let g = grid_prox_oracle(&model, &labels, &x, tau, &cfg).unwrap();
        let objective = |z: &[f64]| env.eval(z) + z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * tau);
        worst_gap = worst_gap.max(objective(&w) - objective(&g));
    }
    outcome(
        worst_eval <= 1e-3 && worst_prox <= cfg.spacing() && worst_gap <= 1e-9,
        format!(
            "400 models: worst envelope error {worst_eval:.3e} (bound 1e-3); quadratic: worst prox error {worst_prox:.3e} (bound {:.0e}); \
             sampled: worst prox objective excess over grid optimum {worst_gap:.3e} (bound 1e-9)",
            cfg.spacing()
        ),
    )
}

struct StereoRun {
    trace: BregmanTrace,
    truth: ScalarField,
}

fn stereo_run() -> StereoRun {
    let (left, right, truth) = synthetic_stereo_pair(64, 7).unwrap();
    let labels = LabelSet::uniform(5, 0.0, 3.0).unwrap();
    let scfg = StereoConfig { patch_radius: 1, beta: 0.1, ..StereoConfig::default() };
    let model = stereo_model(&left, &right, &labels, &scfg).unwrap().scaled(10.0).unwrap();
    let cfg = BregmanConfig {
        steps: 10,
        tv: TvKind::Iso,
        transform_subgradients: false,
        solver: SolverConfig::default().with_tol(1e-4).with_max_iters(5_000).with_step_ratio(0.1),
        ..BregmanConfig::default()
    };
    StereoRun { trace: lifted_bregman(&model, &labels, &cfg).unwrap(), truth }
}

fn criterion_10(s: &StereoRun) -> Outcome {
    let last = &s.trace.last().unwrap().u;
    let mae = last.values().iter().zip(s.truth.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / last.values().len() as f64;
    let tv1 = total_variation(&s.trace.steps[0].u, TvKind::Iso);
    let tv10 = total_variation(last, TvKind::Iso);
    outcome(
        mae <= 0.5 && tv1 <= tv10,
        format!("MAE(u_10) = {mae:.4} px (bound 0.5), TV(u_1) = {tv1:.2} <= TV(u_10) = {tv10:.2}"),
    )
}

fn criterion_11(r: &RofRuns, s: &StereoRun) -> Outcome {
    let iso: Vec<f64> = s.trace.steps.iter().map(|x| x.metrics.non_integral_fraction).collect();
    let an: Vec<f64> = r.transformed.steps.iter().map(|x| x.metrics.non_integral_fraction).collect();
    outcome(
        iso.len() == 10 && an.iter().all(|&x| x <= 0.01),
        format!("non-integral fraction: stereo iso [{}]; ROF an [{}] (bound 1e-2)", fmt(&iso), fmt(&an)),
    )
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let start = Instant::now();
    let mut all = true;
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:>2}: {} ({}) [{:.1}s]", if o.passed { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
        all &= o.passed;
    };
    let rof = [1, 2, 8, 11].into_iter().any(wanted).then(rof_runs);
    let stereo = [10, 11].into_iter().any(wanted).then(stereo_run);
    let checks: [(usize, &dyn Fn() -> Outcome); 11] = [
        (1, &|| criterion_1(rof.as_ref().unwrap())),
        (2, &|| criterion_2(rof.as_ref().unwrap())),
        (3, &criterion_3),
        (4, &criterion_4),
        (5, &criterion_5),
        (6, &criterion_6),
        (7, &criterion_7),
        (8, &|| criterion_8(rof.as_ref().unwrap())),
        (9, &criterion_9),
        (10, &|| criterion_10(stereo.as_ref().unwrap())),
        (11, &|| criterion_11(rof.as_ref().unwrap(), stereo.as_ref().unwrap())),
    ];
    for (n, check) in checks {
        if wanted(n) {
            report(n, check());
        }
    }
    if !all {
        std::process::exit(1);
    }
}
