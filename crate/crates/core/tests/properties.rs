use cagrad::combiners::{combine_cagrad, combine_cagrad_fast, combine_mean, combine_mgda, combine_pcgrad};
use cagrad::expr::{eval, grad, parse, BinaryOp, Expr, UnaryOp};
use cagrad::gradcore::gram_and_bias;
use cagrad::optim::{adam_step, AdamState};
use cagrad::solvers::{
    cagrad_dual_objective, primal_oracle, project_to_simplex, solve_cagrad_weights, solve_minnorm_weights,
    OracleBudget, SolverSettings,
};
use cagrad::{ParamVector, TaskGradients};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn grads(
    k: std::ops::RangeInclusive<usize>,
    m: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = TaskGradients> {
    (k, m).prop_flat_map(|(k, m)| {
        prop::collection::vec(prop::collection::vec(-10.0..10.0f64, m), k)
            .prop_map(|rows| TaskGradients::new(rows).unwrap())
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001..1.0f64, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn grads_and_weights() -> impl Strategy<Value = (TaskGradients, Vec<f64>, Vec<f64>)> {
    grads(2..=5, 1..=4).prop_flat_map(|g| {
        let k = g.tasks();
        (Just(g), simplex(k), simplex(k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn combine_is_linear_in_weights((g, u, v) in grads_and_weights(), t in 0.0..1.0f64) {
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = g.combine(&mix);
        let (gu, gv) = (g.combine(&u), g.combine(&v));
        for j in 0..g.dim() {
            let rhs = t * gu[j] + (1.0 - t) * gv[j];
            prop_assert!((lhs[j] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn gram_quadratic_is_squared_norm((g, w, _) in grads_and_weights()) {
        let gb = gram_and_bias(&g);
        let n = norm(&g.combine(&w));
        prop_assert!((gb.quad(&w) - n * n).abs() <= 1e-10 * (1.0 + n * n));
    }

    #[test]
    fn dual_objective_is_convex((g, u, v) in grads_and_weights(), c in 0.0..5.0f64, t in 0.0..1.0f64) {
        let gb = gram_and_bias(&g);
        let sp = c * norm(g.average());
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f = |w: &[f64]| cagrad_dual_objective(&gb, sp, w);
        let chord = t * f(&u) + (1.0 - t) * f(&v);
        prop_assert!(f(&mix) <= chord + 1e-9 * (1.0 + chord.abs()));
    }

    #[test]
    fn cagrad_weights_minimize_dual((g, w, _) in grads_and_weights(), c in 0.0..5.0f64) {
        let gb = gram_and_bias(&g);
        let g0n = norm(g.average());
        let sol = solve_cagrad_weights(&gb, g0n, c, &SolverSettings::default()).unwrap();
        let other = cagrad_dual_objective(&gb, c * g0n, &w);
        prop_assert!(sol.value <= other + 1e-6 * (1.0 + other.abs()));
    }

    #[test]
    fn projection_beats_simplex_points(v in prop::collection::vec(-5.0..5.0f64, 1..8), seed in any::<u64>()) {
        let p = project_to_simplex(&v).unwrap();
        let best = dist(&v, p.as_slice());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let q: Vec<f64> = {
                use rand::Rng;
                let e: Vec<f64> = (0..v.len()).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            };
            prop_assert!(best <= dist(&v, &q) + 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent(w in (1usize..8).prop_flat_map(simplex)) {
        let p = project_to_simplex(&w).unwrap();
        prop_assert!(dist(p.as_slice(), &w) <= 1e-12);
    }

    #[test]
    fn minnorm_dominates_random_weights((g, w, _) in grads_and_weights()) {
        let gb = gram_and_bias(&g);
        let star = solve_minnorm_weights(&gb.gram, &SolverSettings::default()).unwrap();
        let a = gb.quad(star.as_slice());
        let b = gb.quad(&w);
        prop_assert!(a <= b + 1e-8 * (1.0 + b));
    }

    #[test]
    fn cagrad_respects_ball(g in grads(1..=6, 1..=5), c in 0.0..10.0f64) {
        let r = combine_cagrad(&g, c, &SolverSettings::default()).unwrap();
        let g0 = g.average();
        prop_assert!(dist(&r.d, g0) <= c * norm(g0) * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn cagrad_fast_respects_ball(g in grads(2..=6, 1..=4), c in 0.0..3.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SolverSettings::default();
        for size in 1..=g.tasks() {
            let r = combine_cagrad_fast(&g, c, size, &mut rng, &s).unwrap();
            let g0 = g.average();
            prop_assert!(dist(&r.d, g0) <= c * norm(g0) * (1.0 + 1e-9) + 1e-300);
        }
    }

    #[test]
    fn zero_radius_is_mean(g in grads(1..=6, 1..=5)) {
        let r = combine_cagrad(&g, 0.0, &SolverSettings::default()).unwrap();
        prop_assert_eq!(r, combine_mean(&g));
    }

    #[test]
    fn full_subset_is_full_cagrad(g in grads(1..=6, 1..=4), c in 0.0..3.0f64, seed in any::<u64>()) {
        let s = SolverSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fast = combine_cagrad_fast(&g, c, g.tasks(), &mut rng, &s).unwrap();
        prop_assert_eq!(fast, combine_cagrad(&g, c, &s).unwrap());
    }

    #[test]
    fn combiners_are_scale_equivariant(g in grads(2..=5, 1..=4), c in 0.0..1.0f64, s in 0.01..100.0f64) {
        let set = SolverSettings::default();
        let scaled = g.scaled(s);
        let pairs = [
            (combine_cagrad(&g, c, &set).unwrap().d, combine_cagrad(&scaled, c, &set).unwrap().d),
            (combine_mgda(&g, &set).unwrap().d, combine_mgda(&scaled, &set).unwrap().d),
        ];
        let max_row = g.rows().map(norm).fold(0.0, f64::max);
        for (a, b) in pairs {
            let a: Vec<f64> = a.iter().map(|x| x * s).collect();
            prop_assert!(dist(&a, &b) <= 1e-6 * s * (1.0 + max_row), "{:?} vs {:?}", a, b);
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = combine_pcgrad(&g, &mut r1).d.iter().map(|x| x * s).collect();
        let b = combine_pcgrad(&scaled, &mut r2).d;
        prop_assert!(dist(&a, &b) <= 1e-12 * s * (1.0 + max_row));
    }

    #[test]
    fn pcgrad_pair_ignores_order(g in grads(2..=2, 1..=5), s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = combine_pcgrad(&g, &mut ChaCha8Rng::seed_from_u64(s1));
        let b = combine_pcgrad(&g, &mut ChaCha8Rng::seed_from_u64(s2));
        prop_assert_eq!(a.d, b.d);
    }

    #[test]
    fn pcgrad_output_does_not_conflict_for_pairs(g in grads(2..=2, 1..=5)) {
        let r = combine_pcgrad(&g, &mut ChaCha8Rng::seed_from_u64(0));
        let scale = g.rows().map(|x| norm(x) * norm(x)).fold(0.0, f64::max);
        prop_assert!(r.min_dot >= -1e-12 * (1.0 + scale));
    }

    #[test]
    fn adam_moves_against_constant_direction(d in prop::collection::vec(0.1..10.0f64, 1..4), steps in 1usize..50) {
        let mut state = AdamState::new(d.len());
        let mut theta = ParamVector::new(vec![0.0; d.len()]).unwrap();
        for _ in 0..steps {
            let next = adam_step(&mut state, &theta, &d, 1e-2);
            for j in 0..d.len() {
                prop_assert!(next[j] < theta[j]);
            }
            theta = next;
        }
    }

    #[test]
    fn oracle_value_grows_with_budget(g in grads(2..=4, 2..=2), c in 0.05..2.0f64, j in 1u32..5) {
        let small = primal_oracle(&g, c, OracleBudget::Grid { per_axis: (1 << j) + 1 }).unwrap();
        let large = primal_oracle(&g, c, OracleBudget::Grid { per_axis: (1 << (j + 1)) + 1 }).unwrap();
        prop_assert!(small.value <= large.value);
    }

    #[test]
    fn oracle_never_beats_dual(g in grads(2..=4, 1..=3), c in 0.05..2.0f64) {
        let gb = gram_and_bias(&g);
        let g0n = norm(g.average());
        let dual = solve_cagrad_weights(&gb, g0n, c, &SolverSettings::default()).unwrap().value;
        let primal = primal_oracle(&g, c, OracleBudget::Grid { per_axis: 17 }).unwrap().value;
        prop_assert!(primal <= dual + 1e-9 * (1.0 + dual.abs()));
    }
}

fn smooth_expr(dim: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0.1..3.0f64).prop_map(Expr::Const), (0..dim).prop_map(Expr::Var),];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinaryOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinaryOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinaryOp::Mul, a, b)),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Tanh, a)),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Neg, a)),
            inner
                .clone()
                .prop_map(|a| Expr::unary(UnaryOp::Exp, Expr::unary(UnaryOp::Tanh, a))),
            inner
                .clone()
                .prop_map(|a| Expr::binary(BinaryOp::Pow, a, Expr::Const(2.0))),
            inner.prop_map(|a| Expr::unary(
                UnaryOp::Log,
                Expr::binary(
                    BinaryOp::Add,
                    Expr::Const(1.0),
                    Expr::binary(BinaryOp::Pow, a, Expr::Const(2.0))
                )
            )),
        ]
    })
}

fn central_difference(e: &Expr, theta: &[f64], j: usize, h: f64) -> f64 {
    let mut p = theta.to_vec();
    let mut q = theta.to_vec();
    p[j] += h;
    q[j] -= h;
    (eval(e, &p).unwrap() - eval(e, &q).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn forward_mode_matches_finite_differences(
        e in smooth_expr(3),
        theta in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let g = grad(&e, &theta).unwrap();
        let v = eval(&e, &theta).unwrap();
        for j in 0..3 {
            let h = 1e-5 * (1.0 + theta[j].abs());
            let fd = central_difference(&e, &theta, j, h);
            let tol = 1e-5 * (1.0 + g[j].abs() + v.abs());
            prop_assert!((fd - g[j]).abs() <= tol, "{e}: d/dx{} fd={fd} ad={}", j + 1, g[j]);
        }
    }

    #[test]
    fn gradient_is_linear(
        a in smooth_expr(2),
        b in smooth_expr(2),
        s in -3.0..3.0f64,
        theta in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let combo = Expr::binary(
            BinaryOp::Add,
            Expr::binary(BinaryOp::Mul, Expr::Const(s), a.clone()),
            b.clone(),
        );
        let gc = grad(&combo, &theta).unwrap();
        let (ga, gb) = (grad(&a, &theta).unwrap(), grad(&b, &theta).unwrap());
        for j in 0..2 {
            let want = s * ga[j] + gb[j];
            prop_assert!((gc[j] - want).abs() <= 1e-12 * (1.0 + want.abs() + (s * ga[j]).abs()));
        }
    }

    #[test]
    fn printed_expressions_reparse(e in smooth_expr(3)) {
        prop_assert_eq!(parse(&e.to_string()).unwrap(), e);
    }
}
