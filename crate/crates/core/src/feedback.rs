//! Hamiltonians, the smoothed Heaviside family and feedback resolution under
//! the generalized Isaacs condition.

use crate::model::{GameSpec, Player, Point, Structure, MAX_DIM};
use crate::rng::{stream_rng, uniform};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackError {
    ControlOutOfSet { player: Player, value: f64 },
    NegativeEpsilon(f64),
    /// Resolver mode cannot be used with this game.
    Incompatible(String),
    /// Best-response alternation revisited a state; the visited cycle is attached.
    NoStaticNashPoint { cycle: Vec<(f64, f64)> },
    NonFinite { t: f64, x: [f64; MAX_DIM] },
}

impl fmt::Display for FeedbackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackError::ControlOutOfSet { player, value } => {
                write!(f, "control {value} of player {player} lies outside its control set")
            }
            FeedbackError::NegativeEpsilon(e) => write!(f, "smoothing width must be >= 0, got {e}"),
            FeedbackError::Incompatible(m) => write!(f, "resolver incompatible with game: {m}"),
            FeedbackError::NoStaticNashPoint { cycle } => {
                write!(f, "no static Nash point found; best-response cycle {cycle:?}")
            }
            FeedbackError::NonFinite { t, x } => {
                write!(f, "feedback is not finite at (t,x)=({t}, {x:?})")
            }
        }
    }
}

impl core::error::Error for FeedbackError {}

/// `H_i = p·f(t,x,u1,u2) + h_i(t,x,u1,u2)`.
pub fn hamiltonian(
    spec: &GameSpec,
    player: Player,
    t: f64,
    x: &[f64],
    p: &[f64],
    u1: f64,
    u2: f64,
) -> Result<f64, FeedbackError> {
    for (pl, u) in [(Player::One, u1), (Player::Two, u2)] {
        if !spec.control_set(pl).contains(u) {
            return Err(FeedbackError::ControlOutOfSet { player: pl, value: u });
        }
    }
    Ok(hamiltonian_unchecked(spec, player, t, x, p, u1, u2))
}

#[inline]
pub(crate) fn hamiltonian_unchecked(
    spec: &GameSpec,
    player: Player,
    t: f64,
    x: &[f64],
    p: &[f64],
    u1: f64,
    u2: f64,
) -> f64 {
    let f = spec.drift_at(t, x, u1, u2);
    let mut acc = spec.running_at(player, t, x, u1, u2);
    for d in 0..spec.dim {
        acc += p[d] * f[d];
    }
    acc
}

/// Piecewise-linear ramp of half-width `eps`; the exact Heaviside selection
/// with value ½ at zero when `eps == 0`. Caller guarantees `eps >= 0`.
#[inline]
pub fn heaviside_ramp(eta: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        ((eta + eps) / (2.0 * eps)).clamp(0.0, 1.0)
    } else if eta > 0.0 {
        1.0
    } else if eta < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Smoothed Heaviside: `clamp((η+ε)/(2ε), 0, 1)` for `ε > 0`, the selection
/// {0, ½, 1} for `ε = 0`.
pub fn smoothed_heaviside(eta: f64, epsilon: f64) -> Result<f64, FeedbackError> {
    if epsilon < 0.0 || epsilon.is_nan() {
        return Err(FeedbackError::NegativeEpsilon(epsilon));
    }
    Ok(heaviside_ramp(eta, epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackMode {
    /// Evaluate the game's stored feedback formulas.
    ClosedForm,
    /// Independent per-player grid argmax (separated structures).
    SeparatedArgmax,
    /// Alternating grid argmax until a fixed point.
    BestResponse,
}

impl FeedbackMode {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackMode::ClosedForm => "closed-form",
            FeedbackMode::SeparatedArgmax => "separated-argmax",
            FeedbackMode::BestResponse => "best-response",
        }
    }

    pub fn from_name(s: &str) -> Option<FeedbackMode> {
        [FeedbackMode::ClosedForm, FeedbackMode::SeparatedArgmax, FeedbackMode::BestResponse]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Maps `(t, x, p1, p2)` to a control pair satisfying the GIC.
/// Argmax ties go to the lowest grid index.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackResolver {
    pub mode: FeedbackMode,
    pub smoothing_epsilon: f64,
    pub control_grids: [Vec<f64>; 2],
    pub max_br_iterations: usize,
}

pub const DEFAULT_BR_ITERATIONS: usize = 50;

impl FeedbackResolver {
    pub fn new(spec: &GameSpec, mode: FeedbackMode) -> Result<FeedbackResolver, FeedbackError> {
        let r = FeedbackResolver {
            mode,
            smoothing_epsilon: 0.0,
            control_grids: [spec.controls[0].grid(), spec.controls[1].grid()],
            max_br_iterations: DEFAULT_BR_ITERATIONS,
        };
        r.check_compatible(spec)?;
        Ok(r)
    }

    /// Closed form when the game provides one, else separated argmax when the
    /// structure allows it, else best response.
    pub fn default_for(spec: &GameSpec) -> FeedbackResolver {
        let mode = if spec.feedback_closed_form.is_some() {
            FeedbackMode::ClosedForm
        } else if spec.structure.is_separated() {
            FeedbackMode::SeparatedArgmax
        } else {
            FeedbackMode::BestResponse
        };
        FeedbackResolver::new(spec, mode).expect("mode chosen to match the game")
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> FeedbackResolver {
        self.smoothing_epsilon = epsilon;
        self
    }

    pub fn with_control_grids(mut self, grids: [Vec<f64>; 2]) -> FeedbackResolver {
        self.control_grids = grids;
        self
    }

    pub fn check_compatible(&self, spec: &GameSpec) -> Result<(), FeedbackError> {
        if !(self.smoothing_epsilon >= 0.0) {
            return Err(FeedbackError::NegativeEpsilon(self.smoothing_epsilon));
        }
        if self.control_grids.iter().any(Vec::is_empty) {
            return Err(FeedbackError::Incompatible("empty control grid".into()));
        }
        for p in Player::BOTH {
            let set = spec.control_set(p);
            if let Some(&u) = self.control_grids[p.index()].iter().find(|u| !set.contains(**u)) {
                return Err(FeedbackError::ControlOutOfSet { player: p, value: u });
            }
        }
        match self.mode {
            FeedbackMode::ClosedForm if spec.feedback_closed_form.is_none() => Err(
                FeedbackError::Incompatible("closed-form mode needs stored feedback formulas".into()),
            ),
            FeedbackMode::SeparatedArgmax if spec.structure == Structure::General => {
                Err(FeedbackError::Incompatible(format!(
                    "separated-argmax needs a separated or affine structure, game is {}",
                    spec.structure
                )))
            }
            _ => Ok(()),
        }
    }

    /// Whether the bang-bang smoothing width affects this resolver's output.
    pub fn uses_smoothing(&self, spec: &GameSpec) -> bool {
        self.mode == FeedbackMode::ClosedForm && spec.structure.is_affine()
    }
}

fn grid_argmax(grid: &[f64], mut objective: impl FnMut(f64) -> f64) -> f64 {
    let mut best = grid[0];
    let mut best_val = objective(best);
    for &u in &grid[1..] {
        let v = objective(u);
        // strict: ties keep the lowest index
        if v > best_val {
            best = u;
            best_val = v;
        }
    }
    best
}

/// Resolves the feedback pair at `(t, x, p1, p2)`.
pub fn resolve_feedback(
    resolver: &FeedbackResolver,
    spec: &GameSpec,
    t: f64,
    x: &[f64],
    p1: &[f64],
    p2: &[f64],
) -> Result<(f64, f64), FeedbackError> {
    let (u1, u2) = match resolver.mode {
        FeedbackMode::ClosedForm => {
            let fb = spec.feedback_closed_form.as_ref().ok_or_else(|| {
                FeedbackError::Incompatible("closed-form mode needs stored feedback formulas".into())
            })?;
            let mut pt = Point::at(t, x).with_gradients(p1, p2);
            pt.eps = resolver.smoothing_epsilon;
            (fb[0].eval(&pt), fb[1].eval(&pt))
        }
        FeedbackMode::SeparatedArgmax => {
            // the other player's control only shifts H_i by a constant under separation
            let park = [resolver.control_grids[0][0], resolver.control_grids[1][0]];
            let u1 = grid_argmax(&resolver.control_grids[0], |u| {
                hamiltonian_unchecked(spec, Player::One, t, x, p1, u, park[1])
            });
            let u2 = grid_argmax(&resolver.control_grids[1], |u| {
                hamiltonian_unchecked(spec, Player::Two, t, x, p2, park[0], u)
            });
            (u1, u2)
        }
        FeedbackMode::BestResponse => best_response(resolver, spec, t, x, p1, p2)?,
    };
    if !(u1.is_finite() && u2.is_finite()) {
        let mut xa = [0.0; MAX_DIM];
        xa[..x.len()].copy_from_slice(x);
        return Err(FeedbackError::NonFinite { t, x: xa });
    }
    for (p, u) in [(Player::One, u1), (Player::Two, u2)] {
        if !spec.control_set(p).contains(u) {
            return Err(FeedbackError::ControlOutOfSet { player: p, value: u });
        }
    }
    Ok((u1, u2))
}

fn best_response(
    resolver: &FeedbackResolver,
    spec: &GameSpec,
    t: f64,
    x: &[f64],
    p1: &[f64],
    p2: &[f64],
) -> Result<(f64, f64), FeedbackError> {
    let [g1, g2] = &resolver.control_grids;
    let mut state = (g1[(g1.len() - 1) / 2], g2[(g2.len() - 1) / 2]);
    let mut visited: Vec<(f64, f64)> = alloc::vec![state];
    for _ in 0..resolver.max_br_iterations {
        let u1 = grid_argmax(g1, |u| hamiltonian_unchecked(spec, Player::One, t, x, p1, u, state.1));
        let u2 = grid_argmax(g2, |u| hamiltonian_unchecked(spec, Player::Two, t, x, p2, u1, u));
        let next = (u1, u2);
        if next == state {
            return Ok(next);
        }
        if let Some(k) = visited.iter().position(|s| *s == next) {
            return Err(FeedbackError::NoStaticNashPoint { cycle: visited[k..].to_vec() });
        }
        visited.push(next);
        state = next;
    }
    Err(FeedbackError::NoStaticNashPoint { cycle: visited })
}

/// Sampling box for [`check_gic`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GicSampling {
    pub x_radius: f64,
    pub p_radius: f64,
}

impl Default for GicSampling {
    fn default() -> Self {
        GicSampling { x_radius: 4.0, p_radius: 5.0 }
    }
}

/// One sampled violation of the GIC inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct GicViolation {
    pub player: Player,
    pub t: f64,
    pub x: [f64; MAX_DIM],
    pub p1: [f64; MAX_DIM],
    pub p2: [f64; MAX_DIM],
    pub deviation: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GicReport {
    pub samples: usize,
    /// min over samples and grid deviations of `H_i(ū) − H_i(deviation)`.
    pub worst_violation_1: f64,
    pub worst_violation_2: f64,
    pub violating_points: Vec<GicViolation>,
}

/// Slack below which a gap counts as a violation.
pub const GIC_SLACK: f64 = -1e-12;
const MAX_REPORTED_VIOLATIONS: usize = 16;

impl GicReport {
    pub fn certified(&self) -> bool {
        self.worst_violation_1 >= GIC_SLACK && self.worst_violation_2 >= GIC_SLACK
    }
}

/// Samples `(t, x, p1, p2)` and checks each player's unilateral deviations
/// over the control grid. Deterministic in `seed`.
pub fn check_gic(
    resolver: &FeedbackResolver,
    spec: &GameSpec,
    sample_count: usize,
    seed: u64,
    sampling: GicSampling,
) -> Result<GicReport, FeedbackError> {
    resolver.check_compatible(spec)?;
    let dim = spec.dim;
    let mut rng = stream_rng(seed, 1);
    let mut report = GicReport {
        samples: sample_count,
        worst_violation_1: f64::INFINITY,
        worst_violation_2: f64::INFINITY,
        violating_points: Vec::new(),
    };
    for _ in 0..sample_count {
        let t = spec.horizon * uniform(&mut rng);
        let mut x = [0.0; MAX_DIM];
        let mut p1 = [0.0; MAX_DIM];
        let mut p2 = [0.0; MAX_DIM];
        for d in 0..dim {
            x[d] = sampling.x_radius * (2.0 * uniform(&mut rng) - 1.0);
        }
        for d in 0..dim {
            p1[d] = sampling.p_radius * (2.0 * uniform(&mut rng) - 1.0);
            p2[d] = sampling.p_radius * (2.0 * uniform(&mut rng) - 1.0);
        }
        let (xs, q1, q2) = (&x[..dim], &p1[..dim], &p2[..dim]);
        let (u1, u2) = resolve_feedback(resolver, spec, t, xs, q1, q2)?;
        let h1 = hamiltonian_unchecked(spec, Player::One, t, xs, q1, u1, u2);
        let h2 = hamiltonian_unchecked(spec, Player::Two, t, xs, q2, u1, u2);
        for &v in &resolver.control_grids[0] {
            let gap = h1 - hamiltonian_unchecked(spec, Player::One, t, xs, q1, v, u2);
            report.worst_violation_1 = report.worst_violation_1.min(gap);
            if gap < GIC_SLACK && report.violating_points.len() < MAX_REPORTED_VIOLATIONS {
                report.violating_points.push(GicViolation {
                    player: Player::One,
                    t,
                    x,
                    p1,
                    p2,
                    deviation: v,
                    gap,
                });
            }
        }
        for &v in &resolver.control_grids[1] {
            let gap = h2 - hamiltonian_unchecked(spec, Player::Two, t, xs, q2, u1, v);
            report.worst_violation_2 = report.worst_violation_2.min(gap);
            if gap < GIC_SLACK && report.violating_points.len() < MAX_REPORTED_VIOLATIONS {
                report.violating_points.push(GicViolation {
                    player: Player::Two,
                    t,
                    x,
                    p1,
                    p2,
                    deviation: v,
                    gap,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_scenario, Coeff, ControlSet};
    use alloc::vec;

    /// Affine bang-bang game with constant f1, f2, h1, h2.
    fn affine(f1: f64, f2: f64, h1: f64, h2: f64) -> GameSpec {
        let mut spec = builtin_scenario("case2-bangbang").unwrap();
        spec.drift = vec![Coeff::native(move |p| f1 * p.u1 + f2 * p.u2)];
        spec.running_payoff = [
            Coeff::native(move |p| h1 * p.u1),
            Coeff::native(move |p| h2 * p.u2),
        ];
        spec.feedback_closed_form = Some([
            Coeff::native(move |p| heaviside_ramp(p.p1[0] * f1 + h1, p.eps)),
            Coeff::native(move |p| heaviside_ramp(p.p2[0] * f2 + h2, p.eps)),
        ]);
        spec
    }

    #[test]
    fn hamiltonian_examples() {
        let spec = affine(1.0, 1.0, 0.5, 0.0);
        let h = hamiltonian(&spec, Player::One, 0.0, &[0.0], &[2.0], 1.0, 0.0).unwrap();
        assert_eq!(h, 2.5);
        let heat = builtin_scenario("heat-oracle").unwrap();
        for &(p, u1, u2) in &[(0.0, 0.0, 1.0), (3.0, 0.5, 0.25), (-7.0, 1.0, 1.0)] {
            assert_eq!(hamiltonian(&heat, Player::Two, 0.1, &[0.4], &[p], u1, u2).unwrap(), 0.0);
        }
        let case1 = builtin_scenario("case1-continuous").unwrap();
        let err = hamiltonian(&case1, Player::One, 0.0, &[0.0], &[1.0], 1.5, 0.0).unwrap_err();
        assert!(matches!(err, FeedbackError::ControlOutOfSet { player: Player::One, .. }));
    }

    #[test]
    fn zero_gradient_and_payoff_gives_zero() {
        let spec = affine(1.3, -0.7, 0.0, 0.0);
        assert_eq!(hamiltonian(&spec, Player::One, 0.0, &[1.0], &[0.0], 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn smoothed_heaviside_examples() {
        assert_eq!(smoothed_heaviside(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(smoothed_heaviside(-2.0, 0.5).unwrap(), 0.0);
        assert_eq!(smoothed_heaviside(0.0, 0.5).unwrap(), 0.5);
        assert_eq!(smoothed_heaviside(0.0, 0.0).unwrap(), 0.5);
        assert_eq!(smoothed_heaviside(-1e-300, 0.0).unwrap(), 0.0);
        assert!(smoothed_heaviside(1.0, -0.1).is_err());
    }

    #[test]
    fn resolve_examples() {
        let case1 = builtin_scenario("case1-continuous").unwrap();
        let r = FeedbackResolver::default_for(&case1);
        let (u1, _) = resolve_feedback(&r, &case1, 0.0, &[0.0], &[-4.0], &[0.0]).unwrap();
        assert_eq!(u1, 1.0);

        let spec = affine(1.0, 1.0, 0.0, 0.0);
        let r = FeedbackResolver::new(&spec, FeedbackMode::ClosedForm).unwrap();
        let u = resolve_feedback(&r, &spec, 0.0, &[0.0], &[0.3], &[-0.3]).unwrap();
        assert_eq!(u, (1.0, 0.0));

        // separated argmax on a 3-point grid with p1 f1 + h1 = 2 > 0
        let mut spec = affine(1.0, 1.0, 0.0, 0.0);
        spec.controls = [
            ControlSet::interval_with_grid(0.0, 1.0, 3).unwrap(),
            ControlSet::interval_with_grid(0.0, 1.0, 3).unwrap(),
        ];
        let r = FeedbackResolver::new(&spec, FeedbackMode::SeparatedArgmax).unwrap();
        assert_eq!(r.control_grids[0], [0.0, 0.5, 1.0]);
        let (u1, _) = resolve_feedback(&r, &spec, 0.0, &[0.0], &[2.0], &[0.0]).unwrap();
        assert_eq!(u1, 1.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let spec = affine(1.0, 1.0, 0.0, 0.0);
        let r = FeedbackResolver::new(&spec, FeedbackMode::SeparatedArgmax).unwrap();
        // zero switching argument: every control is optimal
        let u = resolve_feedback(&r, &spec, 0.0, &[0.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(u, (0.0, 0.0));
    }

    #[test]
    fn best_response_finds_fixed_point_of_separated_game() {
        let case1 = builtin_scenario("case1-continuous").unwrap();
        let br = FeedbackResolver::new(&case1, FeedbackMode::BestResponse).unwrap();
        let sep = FeedbackResolver::new(&case1, FeedbackMode::SeparatedArgmax).unwrap();
        for &(p1, p2) in &[(-1.0, 2.0), (0.5, -3.0), (-4.0, 4.0)] {
            let a = resolve_feedback(&br, &case1, 0.2, &[0.1], &[p1], &[p2]).unwrap();
            let b = resolve_feedback(&sep, &case1, 0.2, &[0.1], &[p1], &[p2]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn best_response_reports_cycle() {
        // matching pennies on {0,1}: player 1 wants u1 == u2, player 2 wants u2 != u1
        let mut spec = builtin_scenario("case2-bangbang").unwrap();
        spec.structure = Structure::General;
        spec.feedback_closed_form = None;
        spec.drift = vec![Coeff::constant(0.0)];
        spec.running_payoff = [
            Coeff::native(|p| if p.u1 == p.u2 { 1.0 } else { 0.0 }),
            Coeff::native(|p| if p.u1 != p.u2 { 1.0 } else { 0.0 }),
        ];
        spec.controls = [
            ControlSet::finite(vec![0.0, 1.0]).unwrap(),
            ControlSet::finite(vec![0.0, 1.0]).unwrap(),
        ];
        let r = FeedbackResolver::default_for(&spec);
        assert_eq!(r.mode, FeedbackMode::BestResponse);
        let err = resolve_feedback(&r, &spec, 0.0, &[0.0], &[0.0], &[0.0]).unwrap_err();
        match err {
            FeedbackError::NoStaticNashPoint { cycle } => assert!(cycle.len() >= 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn incompatible_modes_are_rejected() {
        let mut spec = builtin_scenario("case1-continuous").unwrap();
        spec.feedback_closed_form = None;
        assert!(FeedbackResolver::new(&spec, FeedbackMode::ClosedForm).is_err());
        spec.structure = Structure::General;
        assert!(FeedbackResolver::new(&spec, FeedbackMode::SeparatedArgmax).is_err());
    }

    #[test]
    fn gic_certified_for_builtin_closed_forms() {
        for name in ["case1-continuous", "case2-bangbang", "case3-unbounded", "heat-oracle"] {
            let spec = builtin_scenario(name).unwrap();
            let r = FeedbackResolver::default_for(&spec);
            let rep = check_gic(&r, &spec, 2000, 5, GicSampling::default()).unwrap();
            assert!(rep.certified(), "{name}: {rep:?}");
        }
    }

    #[test]
    fn gic_detects_constant_resolver() {
        let mut spec = builtin_scenario("case2-bangbang").unwrap();
        spec.feedback_closed_form = Some([Coeff::constant(0.0), Coeff::constant(0.0)]);
        let r = FeedbackResolver::new(&spec, FeedbackMode::ClosedForm).unwrap();
        let rep = check_gic(&r, &spec, 500, 5, GicSampling::default()).unwrap();
        assert!(rep.worst_violation_1 < 0.0);
        assert!(!rep.violating_points.is_empty());
    }
}
