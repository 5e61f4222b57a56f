use hjbi_core::model::{Coeff, Player};
use hjbi_core::montecarlo::{mean_stderr, weight_estimate};
use hjbi_core::{
    builtin_scenario, deviation_test, estimate_payoff, girsanov_consistency, picard_solve,
    simulate_paths, value_match_test, ControlSource, Deviation, FeedbackResolver, GameSpec, Grid,
    McError, McOptions, PicardOptions, SimulationMode, Strategy, ValueField,
};
use std::f64::consts::FRAC_PI_2;

fn opts(n_paths: usize, n_steps: usize, seed: u64, mode: SimulationMode) -> McOptions {
    McOptions { n_paths, n_steps, seed, mode, ..McOptions::default() }
}

fn zeros() -> ControlSource<'static> {
    ControlSource::explicit(Strategy::Constant(0.0), Strategy::Constant(0.0))
}

fn solved(name: &str, grid: Grid, schedule: Vec<f64>) -> (GameSpec, ValueField, FeedbackResolver) {
    let spec = builtin_scenario(name).unwrap();
    let r = FeedbackResolver::default_for(&spec);
    let o = PicardOptions { epsilon_schedule: schedule, ..PicardOptions::default() };
    let (field, diag) = picard_solve(&spec, &grid, &r, &o).unwrap();
    assert!(diag.converged);
    (spec, field, r)
}

#[test]
fn heat_terminal_payoff_matches_gaussian_oracle() {
    let spec = builtin_scenario("heat-oracle").unwrap();
    for mode in [SimulationMode::ControlledDynamics, SimulationMode::DriftlessGirsanov] {
        let batch = simulate_paths(&spec, &[0.0], &opts(100_000, 10, 3, mode), &zeros()).unwrap();
        let est = estimate_payoff(&batch, Player::One);
        let exact = (-1.0f64).exp();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{est:?}");
    }
}

#[test]
fn driftless_game_has_unit_weights_and_identical_modes() {
    let spec = builtin_scenario("heat-oracle").unwrap();
    let g = simulate_paths(&spec, &[0.3], &opts(500, 20, 11, SimulationMode::DriftlessGirsanov), &zeros())
        .unwrap();
    let c = simulate_paths(&spec, &[0.3], &opts(500, 20, 11, SimulationMode::ControlledDynamics), &zeros())
        .unwrap();
    assert!(g.log_weights.iter().all(|w| *w == 0.0));
    assert_eq!(g.terminal_payoffs, c.terminal_payoffs);
    assert_eq!(weight_estimate(&g), (1.0, 0.0));
}

#[test]
fn one_step_controlled_recursion_is_exact() {
    let spec = builtin_scenario("case1-continuous").unwrap();
    let mut o = opts(50, 1, 5, SimulationMode::ControlledDynamics);
    o.record_paths = true;
    let source = ControlSource::explicit(Strategy::Constant(0.5), Strategy::Constant(-1.0));
    let batch = simulate_paths(&spec, &[0.2], &o, &source).unwrap();
    // recover ΔB from the same run in driftless mode
    o.mode = SimulationMode::DriftlessGirsanov;
    let driftless = simulate_paths(&spec, &[0.2], &o, &source).unwrap();
    let f = 0.2f64.sin() - 0.5 + 1.0;
    for p in 0..50 {
        let db = driftless.states[2 * p + 1] - 0.2;
        assert!((batch.states[2 * p + 1] - (0.2 + f + db)).abs() < 1e-15);
        assert_eq!(batch.controls[p], [0.5, -1.0]);
    }
}

#[test]
fn constant_payoff_estimates() {
    let mut spec = builtin_scenario("case2-bangbang").unwrap();
    spec.terminal_payoff = [Coeff::constant(2.5), Coeff::constant(2.5)];
    spec.running_payoff = [Coeff::constant(0.0), Coeff::constant(0.0)];
    let source = ControlSource::explicit(Strategy::Constant(1.0), Strategy::Constant(0.0));
    let c = simulate_paths(&spec, &[0.0], &opts(2000, 50, 1, SimulationMode::ControlledDynamics), &source)
        .unwrap();
    let est = estimate_payoff(&c, Player::Two);
    assert_eq!((est.mean, est.stderr), (2.5, 0.0));
    let g = simulate_paths(&spec, &[0.0], &opts(2000, 50, 1, SimulationMode::DriftlessGirsanov), &source)
        .unwrap();
    let est = estimate_payoff(&g, Player::Two);
    assert!(est.stderr > 0.0);
    assert!((est.mean - 2.5).abs() <= 3.0 * est.stderr, "{est:?}");
}

#[test]
fn single_path_has_infinite_stderr() {
    let spec = builtin_scenario("heat-oracle").unwrap();
    let batch = simulate_paths(&spec, &[0.0], &opts(1, 5, 0, SimulationMode::ControlledDynamics), &zeros())
        .unwrap();
    assert_eq!(estimate_payoff(&batch, Player::One).stderr, f64::INFINITY);
    assert_eq!(mean_stderr(&[1.0, 3.0]), (2.0, 1.0));
    let err = simulate_paths(&spec, &[0.0], &opts(0, 5, 0, SimulationMode::ControlledDynamics), &zeros());
    assert!(matches!(err, Err(McError::InvalidInput(_))));
}

#[test]
fn batches_are_reproducible_and_seed_dependent() {
    let (spec, field, r) = solved("case1-continuous", Grid::with_spacing(1, 4.0, 0.1, 50, 1.0).unwrap(), vec![]);
    let source = ControlSource::feedback(&field, &r);
    let mut o = opts(300, 50, 9, SimulationMode::ControlledDynamics);
    o.record_paths = true;
    let a = simulate_paths(&spec, &[0.0], &o, &source).unwrap();
    let b = simulate_paths(&spec, &[0.0], &o, &source).unwrap();
    assert_eq!(a, b);
    o.seed = 10;
    let c = simulate_paths(&spec, &[0.0], &o, &source).unwrap();
    assert_ne!(a.terminal_payoffs, c.terminal_payoffs);
    // case1 feedback controls stay in U1 = [0,1], U2 = [-1,1]
    assert!(a.controls.iter().all(|u| (0.0..=1.0).contains(&u[0]) && (-1.0..=1.0).contains(&u[1])));
}

#[test]
fn bang_bang_feedback_is_zero_one_valued() {
    let (spec, field, r) =
        solved("case2-bangbang", Grid::with_spacing(1, 4.0, 0.1, 50, 1.0).unwrap(), vec![0.5, 0.25]);
    let mut o = opts(200, 50, 4, SimulationMode::ControlledDynamics);
    o.record_paths = true;
    let batch = simulate_paths(&spec, &[0.0], &o, &ControlSource::feedback(&field, &r)).unwrap();
    assert!(batch.controls.iter().flatten().all(|u| [0.0, 0.5, 1.0].contains(u)));
}

#[test]
fn deviation_to_feedback_has_zero_gap() {
    let (spec, field, r) =
        solved("case2-bangbang", Grid::with_spacing(1, 4.0, 0.1, 50, 1.0).unwrap(), vec![0.5, 0.25]);
    let devs = [
        Deviation { id: "self".into(), player: Player::One, strategy: Strategy::Feedback },
        Deviation { id: "u2=1".into(), player: Player::Two, strategy: Strategy::Constant(1.0) },
    ];
    let report = deviation_test(&spec, &field, &r, &[0.0], &devs, &opts(500, 50, 2, SimulationMode::ControlledDynamics))
        .unwrap();
    assert_eq!(report.deviations[0].gap, 0.0);
    assert_eq!(report.deviations[0].gap_stderr, 0.0);
    assert!(report.deviations[0].verdict);
    assert_eq!(report.allowance, 0.02);
}

#[test]
fn heat_deviations_have_zero_gap() {
    let (spec, field, r) = solved("heat-oracle", Grid::new(1, FRAC_PI_2, 41, 50, 1.0).unwrap(), vec![]);
    let devs: Vec<Deviation> = [
        (Player::One, Strategy::Constant(1.0)),
        (Player::Two, Strategy::Staircase(vec![0.0, 1.0, 0.25])),
        (Player::One, Strategy::RandomStaircase { seed: 3, pieces: 4 }),
    ]
    .into_iter()
    .enumerate()
    .map(|(k, (player, strategy))| Deviation { id: format!("d{k}"), player, strategy })
    .collect();
    let report = deviation_test(&spec, &field, &r, &[0.0], &devs, &opts(400, 50, 8, SimulationMode::ControlledDynamics))
        .unwrap();
    for d in &report.deviations {
        assert_eq!(d.gap, 0.0, "{}", d.id);
    }
}

#[test]
fn strategies_outside_the_control_set_are_rejected() {
    let spec = builtin_scenario("case2-bangbang").unwrap();
    let source = ControlSource::explicit(Strategy::Constant(2.0), Strategy::Constant(0.0));
    let err = simulate_paths(&spec, &[0.0], &opts(10, 10, 0, SimulationMode::ControlledDynamics), &source);
    assert!(matches!(err, Err(McError::InvalidInput(_))));
    let source = ControlSource::explicit(Strategy::Feedback, Strategy::Constant(0.0));
    assert!(simulate_paths(&spec, &[0.0], &opts(10, 10, 0, SimulationMode::ControlledDynamics), &source).is_err());
}

#[test]
fn constant_game_value_match_is_exact() {
    let mut spec = builtin_scenario("case1-continuous").unwrap();
    spec.terminal_payoff = [Coeff::constant(-1.5), Coeff::constant(-1.5)];
    spec.running_payoff = [Coeff::constant(0.0), Coeff::constant(0.0)];
    let r = FeedbackResolver::default_for(&spec);
    let grid = Grid::with_spacing(1, 4.0, 0.1, 50, 1.0).unwrap();
    let (field, _) = picard_solve(&spec, &grid, &r, &PicardOptions::default()).unwrap();
    let vm = value_match_test(&spec, &field, &r, &[0.0], &opts(100, 50, 0, SimulationMode::ControlledDynamics))
        .unwrap();
    for m in vm {
        assert!((m.pde_value + 1.5).abs() < 1e-12);
        assert!(m.pass && m.difference < 1e-12);
    }
}

#[test]
fn girsanov_check_passes_with_few_paths() {
    let (spec, field, r) =
        solved("case2-bangbang", Grid::with_spacing(1, 4.0, 0.1, 50, 1.0).unwrap(), vec![0.5, 0.25]);
    let report = girsanov_consistency(&spec, &field, &r, &[0.0], &opts(100, 50, 21, SimulationMode::ControlledDynamics))
        .unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.girsanov[0].mode, SimulationMode::DriftlessGirsanov);
}

#[test]
fn coarse_mc_grid_is_flagged() {
    let (spec, field, r) = solved("heat-oracle", Grid::new(1, FRAC_PI_2, 41, 40, 1.0).unwrap(), vec![]);
    let batch = simulate_paths(&spec, &[0.0], &opts(10, 30, 0, SimulationMode::ControlledDynamics), &ControlSource::feedback(&field, &r))
        .unwrap();
    assert!(batch.warnings.iter().any(|w| w.contains("refine")), "{:?}", batch.warnings);
}
