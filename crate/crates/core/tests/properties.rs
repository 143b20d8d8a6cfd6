use isslift::grid::{divergence_adjoint, gradient, DualField, GridShape, LiftedField, ScalarField};
use isslift::lifting::{
    build_envelope, check_sublabel_integral, envelope_eval, envelope_prox, lift, project_k_an, project_k_iso, transform_dual,
    unlift, LabelSet, Piece, PieceModel, SublabelIndex, TvKind,
};
use isslift::solver::{solve_lifted_step, solve_unlifted_rof, SolverConfig};
use proptest::prelude::*;

fn labels_strategy(max: usize) -> impl Strategy<Value = LabelSet> {
    (-2.0..2.0f64, prop::collection::vec(0.05..1.5f64, 1..max)).prop_map(|(start, gaps)| {
        let mut v = vec![start];
        for g in gaps {
            let last = v[v.len() - 1];
            v.push(last + g);
        }
        LabelSet::new(v).unwrap()
    })
}

fn block(labels: &LabelSet, dims: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, labels.intervals() * dims)
}

fn labels_and_block() -> impl Strategy<Value = (LabelSet, usize, Vec<f64>, Vec<f64>)> {
    (labels_strategy(7), 1..3usize).prop_flat_map(|(labels, dims)| {
        let a = block(&labels, dims, 3.0);
        let b = block(&labels, dims, 3.0);
        (Just(labels), Just(dims), a, b)
    })
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn monotone_point(l: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, l).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gradient_and_adjoint_are_transposes(h in 1..8usize, w in 1..8usize, ch in 1..4usize, spacing in 0.05..2.0f64, seed in any::<u64>()) {
        let shape = GridShape::new(h, w).unwrap().with_spacing(spacing).unwrap();
        let mut s = seed;
        let mut next = move || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let u = LiftedField::new(shape, ch, (0..shape.len() * ch).map(|_| next()).collect()).unwrap();
        let q = DualField::new(shape, ch, (0..shape.len() * ch * 2).map(|_| next()).collect()).unwrap();
        let lhs = gradient(&u).dot(&q);
        let rhs = u.dot(&divergence_adjoint(&q));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) / spacing);
    }

    #[test]
    fn projections_are_feasible_idempotent_and_nonexpansive((labels, dims, a, b) in labels_and_block()) {
        for (tv, project) in [(TvKind::Iso, project_k_iso as fn(&[f64], usize, &LabelSet) -> Vec<f64>), (TvKind::An, project_k_an)] {
            let pa = project(&a, dims, &labels);
            let pb = project(&b, dims, &labels);
            prop_assert!(tv.contains(&pa, dims, labels.widths(), 1e-12));
            prop_assert!(norm(&project(&pa, dims, &labels), &pa) <= 1e-14);
            prop_assert!(norm(&pa, &pb) <= norm(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn anisotropic_projection_separates_over_columns((labels, _dims, a, _b) in labels_and_block()) {
        let dims = a.len() / labels.intervals();
        let joint = project_k_an(&a, dims, &labels);
        for j in 0..dims {
            let col: Vec<f64> = (0..labels.intervals()).map(|r| a[r * dims + j]).collect();
            let pc = project_k_an(&col, 1, &labels);
            for r in 0..labels.intervals() {
                prop_assert_eq!(pc[r], joint[r * dims + j]);
            }
        }
    }

    #[test]
    fn transform_keeps_feasibility_and_builds_width_columns((labels, dims, a, _b) in labels_and_block(), pick in any::<prop::sample::Index>(), alpha in 0.0..1.0f64) {
        let i = pick.index(labels.intervals());
        let idx = SublabelIndex { interval: i, alpha };
        let w = labels.widths();
        for tv in [TvKind::Iso, TvKind::An] {
            let mut q = a.clone();
            tv.project(&mut q, dims, w);
            let t = transform_dual(&q, dims, idx, &labels);
            prop_assert!(tv.contains(&t, dims, w, 1e-12));
            for j in 0..dims {
                let c = t[i * dims + j] / w[i];
                for r in 0..labels.intervals() {
                    prop_assert!((t[r * dims + j] - c * w[r]).abs() <= 1e-12);
                }
            }
            prop_assert!(norm(&transform_dual(&t, dims, idx, &labels), &t) <= 1e-12);
        }
    }

    #[test]
    fn lift_round_trips(labels in labels_strategy(7), s in 0.0..=1.0f64) {
        let v = labels.first() + s * (labels.last() - labels.first());
        let (idx, vec) = lift(v, &labels).unwrap();
        prop_assert!((unlift(&vec, &labels) - v).abs() <= 1e-12 * (1.0 + v.abs()));
        let back = check_sublabel_integral(&vec, 1e-9).unwrap();
        prop_assert_eq!(back.interval, idx.interval);
        prop_assert!((back.alpha - idx.alpha).abs() <= 1e-12);
        prop_assert!(idx.alpha < 1.0 || idx.interval == labels.intervals() - 1);
    }

    #[test]
    fn convex_models_are_sublabel_accurate(labels in labels_strategy(6), a in 0.0..3.0f64, b in -2.0..2.0f64, c in -1.0..1.0f64) {
        let model = PieceModel::quadratic(labels.intervals(), a, b, c).unwrap();
        let env = build_envelope(&model, &labels).unwrap();
        for i in 0..labels.intervals() {
            for k in 0..=100 {
                let idx = SublabelIndex { interval: i, alpha: k as f64 / 100.0 };
                let t = labels.value(idx);
                let exact = a * t * t + b * t + c;
                prop_assert!((envelope_eval(&env, &idx.to_vector(labels.intervals())) - exact).abs() <= 1e-8 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn envelope_is_below_the_data_term(labels in labels_strategy(5), vals in prop::collection::vec(-1.0..1.0f64, 24), alpha in 0.0..=1.0f64) {
        let l = labels.intervals();
        let model = PieceModel::new((0..l).map(|j| Piece::Sampled(vals[j * 4..j * 4 + 4].to_vec())).collect()).unwrap();
        let env = build_envelope(&model, &labels).unwrap();
        for i in 0..l {
            let idx = SublabelIndex { interval: i, alpha };
            prop_assert!(env.eval(&idx.to_vector(l)) <= model.value(&labels, idx) + 1e-9);
        }
        let mut outside = vec![0.5; l];
        outside[0] = 1.5;
        prop_assert_eq!(env.eval(&outside), f64::INFINITY);
    }

    #[test]
    fn additivity_of_linear_terms(labels in labels_strategy(6), coef in prop::collection::vec((0.0..3.0f64, -2.0..2.0f64, -1.0..1.0f64), 6), p in -2.0..2.0f64, u in monotone_point(6)) {
        let l = labels.intervals();
        let model = PieceModel::new(coef[..l].iter().map(|&(a, b, c)| Piece::Quadratic { a, b, c }).collect()).unwrap();
        let e1 = build_envelope(&model, &labels).unwrap();
        let e2 = build_envelope(&model.minus_linear(&labels, p), &labels).unwrap();
        let u = &u[..l];
        let shift = p * unlift(u, &labels);
        prop_assert!((e2.eval(u) - e1.eval(u) + shift).abs() <= 1e-6);
    }

    #[test]
    fn prox_lands_in_the_domain_and_is_nonexpansive(labels in labels_strategy(5), vals in prop::collection::vec(0.0..2.0f64, 20), x in prop::collection::vec(-0.5..1.5f64, 4), y in prop::collection::vec(-0.5..1.5f64, 4), tau in 0.01..2.0f64, sampled in any::<bool>()) {
        let l = labels.intervals();
        let pieces = (0..l).map(|j| if sampled {
            Piece::Sampled(vals[j * 5..j * 5 + 5].to_vec())
        } else {
            Piece::Quadratic { a: vals[j * 5], b: vals[j * 5 + 1] - 1.0, c: vals[j * 5 + 2] }
        }).collect();
        let env = build_envelope(&PieceModel::new(pieces).unwrap(), &labels).unwrap();
        let px = envelope_prox(&env, &x[..l], tau).unwrap();
        let py = envelope_prox(&env, &y[..l], tau).unwrap();
        prop_assert!(px.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
        prop_assert!(px.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(norm(&px, &py) <= norm(&x[..l], &y[..l]) + 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rof_solution_keeps_the_shifted_mean(vals in prop::collection::vec(0.0..1.0f64, 36), offs in prop::collection::vec(-0.5..0.5f64, 36), lambda in 2.0..40.0f64) {
        let shape = GridShape::new(6, 6).unwrap().with_spacing(1.0 / 6.0).unwrap();
        let f = ScalarField::new(shape, vals).unwrap();
        let p = ScalarField::new(shape, offs).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-8).with_max_iters(20_000);
        let sol = solve_unlifted_rof(&f, lambda, &p, TvKind::Iso, &cfg, None).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let expected = mean(f.values()) + mean(p.values()) / lambda;
        prop_assert!((mean(sol.u.values()) - expected).abs() <= 1e-9);
    }

    #[test]
    fn lifted_solution_stays_in_the_lifted_domain(vals in prop::collection::vec(0.0..1.0f64, 25), lambda in 2.0..40.0f64, iso in any::<bool>()) {
        let shape = GridShape::new(5, 5).unwrap().with_spacing(0.2).unwrap();
        let labels = LabelSet::uniform(4, 0.0, 1.0).unwrap();
        let img = isslift::dataterms::Image::new(shape, vals).unwrap();
        let envs = isslift::dataterms::rof_model(&img, lambda, &labels).unwrap().envelopes(&labels).unwrap();
        let tv = if iso { TvKind::Iso } else { TvKind::An };
        let cfg = SolverConfig::default().with_tol(1e-7);
        let sol = solve_lifted_step(&envs, &labels, tv, &DualField::zeros(shape, 3), &cfg, None).unwrap();
        for px in sol.u.pixels() {
            prop_assert!(px.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
            prop_assert!(px.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        }
        for px in sol.q.values().chunks(3 * 2) {
            prop_assert!(tv.contains(px, 2, labels.widths(), 1e-9));
        }
    }
}
