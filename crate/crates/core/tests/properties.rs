mod common;

use common::*;
use proptest::prelude::*;
use sparsity_audit::estimators::{lasso, post_double_selection, Controls, LassoOptions};
use sparsity_audit::linalg::{decompose, determinant, DenseMatrix};
use sparsity_audit::model_spec::{
    build_design, hermite, mutual_projection_residual, parse_recipe, random_category_sums, CategoricalEncoding,
    Centering, Clause, ControlClause, ControlKind, DataTable, DesignMatrix, EncodingOption, HermiteClause,
    NormalizationChoice, Recipe, Reference, ReferenceChoice,
};
use sparsity_audit::rng::gaussian_vec;
use sparsity_audit::sparsity_tests::{hausman_test, residual_test, ResidualTarget};
use sparsity_audit::theory_lab::haar_rotation;
use sparsity_audit::Error;

fn seeded_matrix(seed: u64, n: usize, k: usize) -> DenseMatrix {
    gaussian_matrix(&mut rng(seed), n, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn annihilate_is_idempotent(seed in any::<u64>(), n in 5usize..120, frac in 0.05f64..0.95) {
        let k = ((n as f64 * frac) as usize).max(1);
        let x = seeded_matrix(seed, n, k);
        let b = decompose(&x).unwrap();
        let v = gaussian_vec(&mut rng(seed ^ 1), n);
        let once = b.annihilate(&v).unwrap();
        let twice = b.annihilate(&once).unwrap();
        let scale = once.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        let diff = once.iter().zip(&twice).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn leverages_sum_to_rank(seed in any::<u64>(), n in 2usize..=300, k in 1usize..=200, dup in 0usize..4) {
        let k = k.min(n);
        let mut x = seeded_matrix(seed, n, k);
        // Append exact copies of existing columns to exercise rank deficiency.
        for j in 0..dup.min(k) {
            let c = x.column(j).to_vec();
            x = x.with_column(&c).unwrap();
        }
        let b = decompose(&x).unwrap();
        let total: f64 = b.leverages().iter().sum();
        prop_assert!((total - b.rank() as f64).abs() <= 1e-8 * (b.rank() as f64).max(1.0));
        prop_assert!(b.rank() <= k);
    }

    #[test]
    fn annihilator_ignores_column_order(seed in any::<u64>(), n in 10usize..150, k in 1usize..10) {
        let k = k.min(n - 1);
        let x = seeded_matrix(seed, n, k);
        let mut order: Vec<usize> = (0..k).collect();
        order.reverse();
        order.rotate_left(seed as usize % k);
        let xp = x.select_columns(&order);
        let v = gaussian_vec(&mut rng(seed ^ 2), n);
        let a = decompose(&x).unwrap().annihilate(&v).unwrap();
        let c = decompose(&xp).unwrap().annihilate(&v).unwrap();
        let scale = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        for (l, r) in a.iter().zip(&c) {
            prop_assert!((l - r).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn ols_invariant_to_reparametrizing_controls(seed in any::<u64>(), n in 40usize..200, k in 1usize..15) {
        let mut r = rng(seed);
        let w = gaussian_matrix(&mut r, n, k);
        let d: Vec<f64> = gaussian_vec(&mut r, n).iter().zip(w.column(0)).map(|(e, w0)| e + w0).collect();
        let y: Vec<f64> = gaussian_vec(&mut r, n).iter().zip(&d).map(|(e, di)| e + 0.5 * di).collect();
        // A = I + 0.3 G is invertible with overwhelming probability; skip the rare singular draw.
        let g = gaussian_matrix(&mut r, k, k);
        let a = DenseMatrix::from_fn(k, k, |i, j| f64::from(u8::from(i == j)) + 0.3 * g.get(i, j));
        prop_assume!(determinant(&a).unwrap().abs() > 1e-3);
        let wa = w.matmul(&a).unwrap();
        let c1 = Controls::new(DesignMatrix::with_intercept(&w).unwrap()).unwrap();
        let c2 = Controls::new(DesignMatrix::with_intercept(&wa).unwrap()).unwrap();
        let f1 = c1.ols(&y, &d, None).unwrap();
        let f2 = c2.ols(&y, &d, None).unwrap();
        prop_assert!(rel_close(f1.beta, f2.beta, 1e-8));
        prop_assert!(rel_close(f1.se, f2.se, 1e-8));
    }

    #[test]
    fn lasso_objective_never_increases(seed in any::<u64>(), n in 10usize..60, p in 2usize..80, frac in 0.01f64..0.8) {
        let mut r = rng(seed);
        let x = gaussian_matrix(&mut r, n, p);
        let y = gaussian_vec(&mut r, n);
        let max_grad = (0..p).map(|j| x.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
        let fit = lasso(&x, &y, frac * max_grad, &vec![1.0; p], &LassoOptions::default()).unwrap();
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
        prop_assert!(fit.kkt_violation(&x) <= 1e-6);
    }

    #[test]
    fn residual_statistic_respects_ols_lower_bound(seed in any::<u64>(), n in 20usize..150, k in 1usize..12, m in 0usize..12) {
        let mut r = rng(seed);
        let k = k.min(n / 2);
        let x = with_intercept(&gaussian_matrix(&mut r, n, k));
        let y = gaussian_vec(&mut r, n);
        let b = decompose(&x).unwrap();
        let sub: Vec<usize> = (0..=m.min(k)).collect();
        let resid = decompose(&x.select_columns(&sub)).unwrap().annihilate(&y).unwrap();
        let rep = residual_test(&b, ResidualTarget::Propensity, &y, &resid, 0.05, None).unwrap();
        prop_assert!(rep.rss_lasso >= rep.rss_ols * (1.0 - 1e-8));
        // Residuals smaller than the full-OLS residuals are infeasible and rejected.
        let shrunk: Vec<f64> = b.annihilate(&y).unwrap().iter().map(|e| 0.5 * e).collect();
        let err = residual_test(&b, ResidualTarget::Propensity, &y, &shrunk, 0.05, None).unwrap_err();
        let is_bound = matches!(err, Error::LowerBoundViolated { .. });
        prop_assert!(is_bound, "unexpected error: {}", err);
    }

    #[test]
    fn category_sums_span_one_hot(k in 2usize..12, seed in any::<u64>()) {
        let map = random_category_sums(k, seed).unwrap();
        let codes: Vec<usize> = (0..(4 * k)).map(|i| i % k).collect();
        let mut sums = map.encode(&codes);
        sums.insert(0, vec![1.0; codes.len()]);
        let onehot: Vec<Vec<f64>> = (0..k).map(|g| codes.iter().map(|&c| f64::from(u8::from(c == g))).collect()).collect();
        let a = DenseMatrix::from_columns(&sums).unwrap();
        let b = DenseMatrix::from_columns(&onehot).unwrap();
        prop_assert!(mutual_projection_residual(&a, &b).unwrap() <= 1e-8);
        prop_assert_eq!(map.clone(), random_category_sums(k, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn haar_rotations_are_proper_orthogonal(p in 1usize..=200, seed in any::<u64>()) {
        let r = haar_rotation(p, seed).unwrap();
        let rtr = r.transpose().matmul(&r).unwrap();
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((rtr.get(i, j) - target).abs() <= 1e-10);
            }
        }
        prop_assert!((determinant(&r).unwrap() - 1.0).abs() <= 1e-8);
    }
}

fn sample_table(seed: u64) -> DataTable {
    let n = 80;
    let mut r = rng(seed);
    let x: Vec<String> = gaussian_vec(&mut r, n).iter().map(|v| format!("{:?}", 2.0 + v)).collect();
    let z: Vec<String> = gaussian_vec(&mut r, n).iter().map(|v| format!("{v:?}")).collect();
    let g: Vec<String> = (0..n).map(|i| format!("L{}", (i * 7 + seed as usize) % 5)).collect();
    let b: Vec<String> = (0..n).map(|i| ((i / 3) % 2).to_string()).collect();
    let h: Vec<String> = (0..n).map(|i| ["L0", "L1", "L2"][(i * 5 + 1) % 3].to_string()).collect();
    DataTable::new(
        ["x", "z", "g", "b", "h"].iter().map(|s| s.to_string()).collect(),
        vec![x, z, g, b, h],
    )
    .unwrap()
}

fn centering() -> impl Strategy<Value = Centering> {
    prop_oneof![
        Just(Centering::None),
        Just(Centering::Mean),
        Just(Centering::Median),
        Just(Centering::Range01),
        Just(Centering::Range11),
        (-3.0f64..3.0).prop_map(Centering::Offset),
    ]
}

fn recipe() -> impl Strategy<Value = Recipe> {
    (
        proptest::option::of(centering()),
        1u32..=3,
        prop_oneof![Just(None), Just(Some(Reference::Auto)), Just(Some(Reference::Level("L3".into())))],
        proptest::option::of(prop_oneof![Just(EncodingOption::OneHot), Just(EncodingOption::Sums)]),
        any::<bool>(),
        any::<bool>(),
        proptest::option::of((1u32..=4, proptest::option::of(-1.0f64..1.0))),
    )
        .prop_map(|(center, powers, reference, encode, with_binary, interact, herm)| {
            let mut x = ControlClause::new("x", ControlKind::Continuous);
            x.center = center;
            x.powers = Some(powers);
            let mut g = ControlClause::new("g", ControlKind::Categorical);
            if encode != Some(EncodingOption::Sums) {
                g.reference = reference;
            }
            g.encode = encode;
            let mut clauses = vec![Clause::Control(x), Clause::Control(g)];
            if with_binary {
                clauses.push(Clause::Control(ControlClause::new("b", ControlKind::Binary)));
            }
            clauses.push(Clause::Control(ControlClause::new("h", ControlKind::Categorical)));
            if interact {
                clauses.push(Clause::Interact(vec!["x".into(), "h".into()]));
            }
            if let Some((degree, offset)) = herm {
                clauses.push(Clause::Hermite(HermiteClause { name: "z".into(), degree, offset }));
            }
            Recipe { clauses }
        })
}

fn choice() -> impl Strategy<Value = NormalizationChoice> {
    (
        proptest::option::of(centering()),
        proptest::option::of(prop_oneof![
            Just(CategoricalEncoding::OneHot(ReferenceChoice::Auto)),
            Just(CategoricalEncoding::OneHot(ReferenceChoice::Level("L2".into()))),
            any::<u64>().prop_map(CategoricalEncoding::Sums),
        ]),
        proptest::option::of(any::<u64>()),
        proptest::option::of(-1.0f64..1.0),
    )
        .prop_map(|(centering, categorical_encoding, column_order_seed, off)| NormalizationChoice {
            centering,
            categorical_encoding,
            column_order_seed,
            hermite_offsets: off.map(|o| vec![o]),
        })
}

/// Drops hermite offsets the recipe has no clause for.
fn fit_choice(r: &Recipe, mut c: NormalizationChoice) -> NormalizationChoice {
    if r.hermites().count() == 0 {
        c.hermite_offsets = None;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recipe_text_round_trips(r in recipe()) {
        let text = r.to_string();
        let parsed = parse_recipe(&text).unwrap();
        prop_assert_eq!(&parsed, &r);
        prop_assert_eq!(parsed.to_string(), text);
    }

    #[test]
    fn normalizations_preserve_the_span(r in recipe(), a in choice(), b in choice(), seed in 0u64..1000) {
        let table = sample_table(seed);
        let (a, b) = (fit_choice(&r, a), fit_choice(&r, b));
        // Categorical encodings override the clause reference only when present;
        // both choices then span the same space as long as every dummy set is complete.
        let da = build_design(&r, &table, &a).unwrap();
        let db = build_design(&r, &table, &b).unwrap();
        prop_assert_eq!(da.bundle().unwrap().rank(), db.bundle().unwrap().rank());
        prop_assert!(mutual_projection_residual(&da.matrix, &db.matrix).unwrap() <= 1e-8);
        prop_assert_eq!(da.provenance.len(), da.cols());
    }

    #[test]
    fn design_construction_is_deterministic(r in recipe(), c in choice(), seed in 0u64..1000) {
        let table = sample_table(seed);
        let c = fit_choice(&r, c);
        let a = build_design(&r, &table, &c).unwrap();
        let b = build_design(&r, &table, &c).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hausman_is_scale_invariant(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (n, k) = (200, 20);
        let mut r = rng(seed);
        let w = gaussian_matrix(&mut r, n, k);
        let d: Vec<f64> = gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.7 * w.get(i, 0)).collect();
        let y: Vec<f64> = gaussian_vec(&mut r, n).iter().enumerate().map(|(i, e)| e + 0.4 * d[i] + 0.6 * w.get(i, 1)).collect();
        let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
        let controls = Controls::new(DesignMatrix::with_intercept(&w).unwrap()).unwrap();
        let opts = LassoOptions::default();
        let h1 = hausman_test(&controls.ols(&y, &d, None).unwrap(), &post_double_selection(&y, &d, &controls, None, &opts).unwrap(), None).unwrap();
        let h2 = hausman_test(&controls.ols(&yc, &d, None).unwrap(), &post_double_selection(&yc, &d, &controls, None, &opts).unwrap(), None).unwrap();
        prop_assert!(rel_close(h2.diff, c * h1.diff, 1e-8));
        prop_assert!(rel_close(h2.se_h, c * h1.se_h, 1e-8));
        prop_assert!((h1.z - h2.z).abs() <= 1e-10 * h1.z.abs().max(1.0));
        prop_assert!((h1.p_two_sided - h2.p_two_sided).abs() <= 1e-10);
    }
}

/// `n! sum_m (-1)^m x^{n-2m} / (m! (n-2m)! 2^m)`, divided by `sqrt(n!)`.
fn hermite_direct(n: usize, x: f64) -> (f64, f64) {
    let fact = |m: usize| (1..=m).fold(1.0, |a, i| a * i as f64);
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for m in 0..=n / 2 {
        let t = fact(n) / (fact(m) * fact(n - 2 * m) * 2f64.powi(m as i32)) * x.powi((n - 2 * m) as i32);
        let t = if m % 2 == 1 { -t } else { t };
        sum += t;
        abs_sum += t.abs();
    }
    let norm = fact(n).sqrt();
    (sum / norm, abs_sum / norm)
}

#[test]
fn hermite_recurrence_matches_factorial_formula() {
    for n in 0..=20usize {
        for xi in -3..=3 {
            let x = xi as f64;
            let (direct, scale) = hermite_direct(n, x);
            let rec = hermite(n, x);
            // Relative to the magnitude of the alternating terms, which bounds the
            // rounding error of the direct sum.
            assert!((rec - direct).abs() <= 1e-10 * scale.max(direct.abs()).max(1e-300), "n={n} x={x}: {rec} vs {direct}");
            if direct.abs() > 1e-6 * scale {
                assert!((rec - direct).abs() <= 1e-10 * direct.abs(), "n={n} x={x}: {rec} vs {direct}");
            }
        }
    }
}
