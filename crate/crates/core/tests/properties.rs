use hjbi_core::dsl::{evaluate, parse};
use hjbi_core::feedback::heaviside_ramp;
use hjbi_core::model::{DiffusionMatrixField, Player};
use hjbi_core::{
    builtin_scenario, hamiltonian, linear_parabolic_solve, resolve_feedback, smoothed_heaviside,
    FeedbackMode, FeedbackResolver, Grid, ValueField,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

const VARS: [&str; 4] = ["t", "x1", "u1", "p1"];

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| format!("{}", n as f64 / 8.0)),
        prop::sample::select(VARS.to_vec()).prop_map(String::from),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]), inner.clone())
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (inner.clone(), prop::sample::select(vec!["2", "3", "-1", "0.5", "(1/2)"]))
                .prop_map(|(a, e)| format!("({a})^{e}")),
            (prop::sample::select(vec!["sin", "cos", "exp", "abs", "sign", "tanh"]), inner.clone())
                .prop_map(|(f, a)| format!("{f}({a})")),
            (prop::sample::select(vec!["min", "max", "heav_eps"]), inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| format!("{f}({a}, {b})")),
            (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| format!("clamp({a}, {b}, {c})")),
        ]
    })
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn heaviside_is_monotone_and_exact_outside_ramp(a in -10.0f64..10.0, b in -10.0f64..10.0, eps in 0.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (hl, hh) = (smoothed_heaviside(lo, eps).unwrap(), smoothed_heaviside(hi, eps).unwrap());
        prop_assert!((0.0..=1.0).contains(&hl) && hl <= hh);
        if a.abs() >= eps && a != 0.0 {
            prop_assert_eq!(heaviside_ramp(a, eps), if a > 0.0 { 1.0 } else { 0.0 });
        }
        prop_assert!(smoothed_heaviside(a, -eps - 1e-3).is_err());
    }

    #[test]
    fn dsl_display_round_trips(text in expr_text(), vals in prop::array::uniform4(-3.0f64..3.0)) {
        let e = parse(&text, &VARS).unwrap();
        let shown = e.to_string();
        let again = parse(&shown, &VARS).unwrap();
        prop_assert_eq!(&e, &again, "{} -> {}", text, shown);
        let bindings: BTreeMap<String, f64> = VARS.iter().map(|v| v.to_string()).zip(vals).collect();
        match (evaluate(&e, &bindings), evaluate(&again, &bindings)) {
            (Ok(a), Ok(b)) => prop_assert!(same(a, b)),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn separated_feedback_ignores_other_gradient(
        t in 0.0f64..1.0, x in -4.0f64..4.0, p1 in -6.0f64..6.0, q in -6.0f64..6.0, r in -6.0f64..6.0,
    ) {
        let spec = builtin_scenario("case1-continuous").unwrap();
        for mode in [FeedbackMode::ClosedForm, FeedbackMode::SeparatedArgmax] {
            let res = FeedbackResolver::new(&spec, mode).unwrap();
            let a = resolve_feedback(&res, &spec, t, &[x], &[p1], &[q]).unwrap();
            let b = resolve_feedback(&res, &spec, t, &[x], &[p1], &[r]).unwrap();
            prop_assert_eq!(a.0, b.0);
            prop_assert!(spec.controls[0].contains(a.0) && spec.controls[1].contains(a.1));
        }
    }

    #[test]
    fn feedback_without_running_payoff_is_scale_invariant(
        t in 0.0f64..1.0, x in -4.0f64..4.0, p1 in -6.0f64..6.0, p2 in -6.0f64..6.0, lambda in 0.01f64..100.0,
    ) {
        let spec = builtin_scenario("case3-unbounded").unwrap();
        let res = FeedbackResolver::default_for(&spec);
        let a = resolve_feedback(&res, &spec, t, &[x], &[p1], &[p2]).unwrap();
        let b = resolve_feedback(&res, &spec, t, &[x], &[lambda * p1], &[lambda * p2]).unwrap();
        prop_assert_eq!(a, b);
        let h = hamiltonian(&spec, Player::One, t, &[x], &[p1], a.0, a.1).unwrap();
        let hl = hamiltonian(&spec, Player::One, t, &[x], &[lambda * p1], a.0, a.1).unwrap();
        prop_assert!((hl - lambda * h).abs() <= 1e-9 * (1.0 + hl.abs()));
    }

    #[test]
    fn bang_bang_feedback_maximizes_own_hamiltonian(
        t in 0.0f64..1.0, x in -4.0f64..4.0, p1 in -6.0f64..6.0, p2 in -6.0f64..6.0,
    ) {
        let spec = builtin_scenario("case2-bangbang").unwrap();
        let res = FeedbackResolver::default_for(&spec);
        let (u1, u2) = resolve_feedback(&res, &spec, t, &[x], &[p1], &[p2]).unwrap();
        let h1 = hamiltonian(&spec, Player::One, t, &[x], &[p1], u1, u2).unwrap();
        let h2 = hamiltonian(&spec, Player::Two, t, &[x], &[p2], u1, u2).unwrap();
        for v in spec.controls[0].grid() {
            prop_assert!(h1 >= hamiltonian(&spec, Player::One, t, &[x], &[p1], v, u2).unwrap() - 1e-12);
            prop_assert!(h2 >= hamiltonian(&spec, Player::Two, t, &[x], &[p2], u1, v).unwrap() - 1e-12);
        }
    }

    #[test]
    fn linear_solve_is_monotone_and_positive(
        g in prop::collection::vec(0.0f64..2.0, 21),
        bump in prop::collection::vec(0.0f64..1.0, 21),
        drift in -1.0f64..1.0,
        source in 0.0f64..1.0,
    ) {
        let spec = builtin_scenario("case1-continuous").unwrap();
        let grid = Grid::new(1, 2.0, 21, 40, 1.0).unwrap();
        let a = DiffusionMatrixField::new(&spec, [(0.0, [0.0; 2])]).unwrap();
        let n = grid.levels() * grid.n_nodes();
        let f = vec![drift; n];
        let h = vec![source; n];
        let g2: Vec<f64> = g.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let lo = linear_parabolic_solve(&grid, &a, &f, &h, &g).unwrap();
        let hi = linear_parabolic_solve(&grid, &a, &f, &h, &g2).unwrap();
        for (l, u) in lo.values.iter().zip(&hi.values) {
            prop_assert!(*l >= -1e-14);
            prop_assert!(l <= &(u + 1e-12));
        }
    }

    #[test]
    fn gradients_are_central_differences(vals in prop::collection::vec(-5.0f64..5.0, 11 * 3)) {
        let grid = Grid::new(1, 1.0, 11, 2, 1.0).unwrap();
        let field = ValueField::from_values(grid, [vals.clone(), vals.clone()]).unwrap();
        let h = grid.spacing();
        for k in 0..3 {
            for i in 1..10 {
                let want = (vals[k * 11 + i + 1] - vals[k * 11 + i - 1]) / (2.0 * h);
                prop_assert!((field.gradient(Player::Two, k, i)[0] - want).abs() < 1e-12);
            }
            let left = (vals[k * 11 + 1] - vals[k * 11]) / h;
            prop_assert!((field.gradient(Player::One, k, 0)[0] - left).abs() < 1e-12);
        }
    }
}
