//! Seeded invariant suite backed by the oracles, for end-to-end sanity runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{divergence_adjoint, gradient, DualField, GridShape, LiftedField, ScalarField};
use crate::lifting::transform::source_rows;
use crate::lifting::{build_envelope, lift, transform_dual_columns, LabelSet, Piece, PieceModel, TvKind};
use crate::oracles::taut_string_tv1d;
use crate::solver::{solve_unlifted_rof, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Random cases per check.
    pub cases: usize,
    /// Test hook: replace the adjoint under test by a broken one.
    pub inject_wrong_adjoint: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self { seed: 0, cases: 50, inject_wrong_adjoint: false }
    }
}

/// Outcome of one check: the worst error over all cases and its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &'static str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self { name, cases, worst, tolerance, passed: worst <= tolerance }
    }
}

/// Runs every check with independent, seed-derived random streams.
pub fn run_selftest(opts: &SelftestOptions) -> Vec<CheckReport> {
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(31).wrapping_add(k));
    vec![
        check_adjoint(&mut rng(1), opts.cases, opts.inject_wrong_adjoint),
        check_projections(&mut rng(2), opts.cases),
        check_additivity(&mut rng(3), opts.cases),
        check_taut_string(&mut rng(4), opts.cases.min(20)),
        check_dual_structure(&mut rng(5), opts.cases),
    ]
}

fn random_labels(rng: &mut ChaCha8Rng, counts: std::ops::Range<usize>) -> LabelSet {
    let count = rng.gen_range(counts);
    let mut v = vec![rng.gen_range(-1.0..1.0)];
    for _ in 1..count {
        let last = v[v.len() - 1];
        v.push(last + rng.gen_range(0.1..1.0));
    }
    LabelSet::new(v).expect("increasing labels")
}

fn adjoint_under_test(q: &DualField, wrong: bool) -> LiftedField {
    let mut p = divergence_adjoint(q);
    if wrong {
        p.values_mut().iter_mut().for_each(|v| *v = -*v);
    }
    p
}

fn check_adjoint(rng: &mut ChaCha8Rng, cases: usize, wrong: bool) -> CheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let shape = GridShape::new(rng.gen_range(1..10), rng.gen_range(2..10)).expect("non-empty grid");
        let ch = rng.gen_range(1..5);
        let u = LiftedField::new(shape, ch, (0..shape.len() * ch).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("sized field");
        let q = DualField::new(shape, ch, (0..shape.len() * ch * shape.dims()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("sized field");
        let gu = gradient(&u);
        let aq = adjoint_under_test(&q, wrong);
        let scale = gu.norm() * q.norm() + u.norm() * aq.norm();
        worst = worst.max((gu.dot(&q) - u.dot(&aq)).abs() / scale.max(1e-300));
    }
    CheckReport::new("adjointness", cases, worst, 1e-12)
}

/// Feasibility, idempotence, non-expansiveness and the obtuse-angle
/// condition against random feasible points.
fn check_projections(rng: &mut ChaCha8Rng, cases: usize) -> CheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let labels = random_labels(rng, 2..7);
        let dims = rng.gen_range(1..3);
        let n = labels.intervals() * dims;
        let w = labels.widths();
        for tv in [TvKind::Iso, TvKind::An] {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut pa = a.clone();
            tv.project(&mut pa, dims, w);
            let mut pb = b.clone();
            tv.project(&mut pb, dims, w);
            if !tv.contains(&pa, dims, w, 1e-12) {
                worst = f64::INFINITY;
            }
            let mut ppa = pa.clone();
            tv.project(&mut ppa, dims, w);
            worst = worst.max(max_diff(&ppa, &pa));
            let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt();
            worst = worst.max(dist(&pa, &pb) - dist(&a, &b));
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            tv.project(&mut z, dims, w);
            let angle: f64 = (0..n).map(|k| (a[k] - pa[k]) * (z[k] - pa[k])).sum();
            worst = worst.max(angle);
        }
    }
    CheckReport::new("projections", cases, worst, 1e-10)
}

/// Subtracting `p t` from every piece shifts the envelope by
/// `-p (g_1 + <widths, u>)`.
fn check_additivity(rng: &mut ChaCha8Rng, cases: usize) -> CheckReport {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..cases {
        let labels = random_labels(rng, 2..6);
        let l = labels.intervals();
        let pieces = (0..l)
            .map(|_| Piece::Quadratic {
                a: rng.gen_range(0.0..3.0),
                b: rng.gen_range(-2.0..2.0),
                c: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let model = PieceModel::new(pieces).expect("valid pieces");
        let p = rng.gen_range(-2.0..2.0);
        let (Ok(e1), Ok(e2)) = (build_envelope(&model, &labels), build_envelope(&model.minus_linear(&labels, p), &labels)) else {
            return CheckReport::new("additivity", checked, f64::INFINITY, 1e-8);
        };
        for _ in 0..5 {
            let mut u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
            u.sort_by(|a, b| b.total_cmp(a));
            let shift: f64 = p * labels.first() + u.iter().zip(labels.widths()).map(|(a, w)| p * a * w).sum::<f64>();
            worst = worst.max((e2.eval(&u) - e1.eval(&u) + shift).abs());
            checked += 1;
        }
    }
    CheckReport::new("additivity", checked, worst, 1e-8)
}

/// PDHG on a line against the exact taut-string solution of the same step,
/// with the linear term absorbed into the data.
fn check_taut_string(rng: &mut ChaCha8Rng, cases: usize) -> CheckReport {
    let mut worst: f64 = 0.0;
    let config = SolverConfig::default().with_tol(1e-9).with_max_iters(200_000);
    for _ in 0..cases {
        let n = rng.gen_range(8..48);
        let shape = GridShape::line(n).expect("non-empty line");
        let lambda = rng.gen_range(5.0..60.0);
        let f = ScalarField::new(shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).expect("sized");
        let p = ScalarField::new(shape, (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).expect("sized");
        let Ok(sol) = solve_unlifted_rof(&f, lambda, &p, TvKind::An, &config, None) else {
            return CheckReport::new("taut-string", cases, f64::INFINITY, 1e-5);
        };
        let shifted: Vec<f64> = f.values().iter().zip(p.values()).map(|(a, b)| a + b / lambda).collect();
        let exact = taut_string_tv1d(&shifted, 1.0 / (lambda * shape.spacing()));
        worst = worst.max(max_diff(sol.u.values(), &exact));
    }
    CheckReport::new("taut-string", cases, worst, 1e-5)
}

/// On sublabel-integral 1D fields the anisotropic dual maximizer carries
/// `sign * widths` on exactly the rows the gradient touches, and the
/// transform turns it into `+-widths` wherever the unlifted field jumps.
fn check_dual_structure(rng: &mut ChaCha8Rng, cases: usize) -> CheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let labels = random_labels(rng, 2..7);
        let n = rng.gen_range(4..24);
        let shape = GridShape::line(n).expect("non-empty line");
        let (field, idx) = random_integral_field(rng, &labels, shape);
        let dev = dual_structure_deviation(&field, &idx, &labels, rng);
        worst = worst.max(dev);
    }
    CheckReport::new("dual-structure", cases, worst, 1e-10)
}

/// Random sublabel-integral field on `shape`; a third of the pixels sit on labels.
pub fn random_integral_field(
    rng: &mut impl Rng,
    labels: &LabelSet,
    shape: GridShape,
) -> (LiftedField, Vec<crate::lifting::SublabelIndex>) {
    let l = labels.intervals();
    let mut values = Vec::with_capacity(shape.len() * l);
    let mut idx = Vec::with_capacity(shape.len());
    let mut prev = labels.first();
    for _ in 0..shape.len() {
        let v = match rng.gen_range(0..3) {
            0 => labels.labels()[rng.gen_range(0..labels.count())],
            1 => prev,
            _ => rng.gen_range(labels.first()..=labels.last()),
        };
        prev = v;
        let (i, vec) = lift(v, labels).expect("value in range");
        values.extend(vec);
        idx.push(i);
    }
    (LiftedField::new(shape, l, values).expect("sized field"), idx)
}

/// Max deviation from the maximizer pattern and the transformed `+-widths`
/// structure, for a 1D sublabel-integral field. The maximizer is obtained by
/// projecting a random feasible point pushed far along the gradient.
pub fn dual_structure_deviation(
    field: &LiftedField,
    idx: &[crate::lifting::SublabelIndex],
    labels: &LabelSet,
    rng: &mut impl Rng,
) -> f64 {
    let shape = field.shape();
    let l = labels.intervals();
    let w = labels.widths();
    let h = shape.spacing();
    let g = gradient(field);
    let mut worst: f64 = 0.0;
    for m in 0..shape.len() - 1 {
        let (i, a) = (idx[m].interval, idx[m].alpha);
        let (j, b) = (idx[m + 1].interval, idx[m + 1].alpha);
        let expected: Vec<f64> = (0..l)
            .map(|r| {
                let v = if i < j {
                    if r == i {
                        1.0 - a
                    } else if r > i && r < j {
                        1.0
                    } else if r == j {
                        b
                    } else {
                        0.0
                    }
                } else if i == j {
                    if r == i { b - a } else { 0.0 }
                } else if r == j {
                    b - 1.0
                } else if r > j && r < i {
                    -1.0
                } else if r == i {
                    -a
                } else {
                    0.0
                };
                v / h
            })
            .collect();
        let gm = g.pixel(m);
        worst = worst.max(max_diff(gm, &expected) * h);

        let mut q: Vec<f64> = w.iter().map(|&wr| rng.gen_range(-wr..=wr)).collect();
        for (r, v) in q.iter_mut().enumerate() {
            *v += 1e12 * gm[r];
        }
        TvKind::An.project(&mut q, 1, w);
        for r in 0..l {
            if gm[r] != 0.0 {
                worst = worst.max((q[r] - gm[r].signum() * w[r]).abs());
            }
        }

        let diff = labels.value(idx[m + 1]) - labels.value(idx[m]);
        let rows = source_rows(idx[m], &[diff], TvKind::An, l, 1e-12, 0.0);
        let t = transform_dual_columns(&q, 1, &rows, labels);
        if diff != 0.0 {
            for r in 0..l {
                worst = worst.max((t[r] - diff.signum() * w[r]).abs());
            }
        }
    }
    worst
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_selftest(&SelftestOptions { cases: 10, ..Default::default() });
        for r in &report {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn wrong_adjoint_is_caught_by_the_adjoint_check_only() {
        let report = run_selftest(&SelftestOptions { cases: 10, inject_wrong_adjoint: true, ..Default::default() });
        for r in &report {
            assert_eq!(r.passed, r.name != "adjointness", "{r:?}");
        }
    }
}
