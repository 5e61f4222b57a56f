//! Euler–Maruyama simulation of the game, Girsanov-weighted and controlled
//! payoff estimates, Nash deviation tests and the PDE/MC value match.
//!
//! Path `i` draws its Brownian increments from stream `i` of the run seed, so
//! a batch is bitwise reproducible under any parallel schedule and deviation
//! runs with the same seed see the same increments (common random numbers).

use crate::feedback::{resolve_feedback, FeedbackError, FeedbackResolver};
use crate::math::{exp, sqrt};
use crate::model::{is_invertible, solve_small, GameSpec, Player, MAX_DIM};
use crate::par_map;
use crate::rng::{normal, stream_rng, uniform, StreamRng};
use crate::solver::ValueField;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum McError {
    InvalidInput(String),
    SingularSigma { path: usize, step: usize, x: [f64; MAX_DIM] },
    Feedback { path: usize, step: usize, source: FeedbackError },
    NonFinite { path: usize, step: usize },
}

impl fmt::Display for McError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            McError::InvalidInput(m) => write!(f, "invalid Monte-Carlo input: {m}"),
            McError::SingularSigma { path, step, x } => {
                write!(f, "sigma not invertible on path {path}, step {step}, x = {x:?}")
            }
            McError::Feedback { path, step, source } => {
                write!(f, "feedback failed on path {path}, step {step}: {source}")
            }
            McError::NonFinite { path, step } => {
                write!(f, "path {path} became non-finite at step {step}")
            }
        }
    }
}

impl core::error::Error for McError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimulationMode {
    /// `X' = X + σ ΔB`, payoffs reweighted by `exp(M − ½⟨M⟩)`.
    DriftlessGirsanov,
    /// `X' = X + f Δt + σ ΔB`, unit weights.
    ControlledDynamics,
}

impl SimulationMode {
    pub fn name(self) -> &'static str {
        match self {
            SimulationMode::DriftlessGirsanov => "driftless-girsanov",
            SimulationMode::ControlledDynamics => "controlled-dynamics",
        }
    }

    pub fn from_name(s: &str) -> Option<SimulationMode> {
        [SimulationMode::DriftlessGirsanov, SimulationMode::ControlledDynamics]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub mode: SimulationMode,
    /// Keep per-step states and controls in the batch.
    pub record_paths: bool,
    /// Fraction of paths leaving the field's box above which a warning is raised.
    pub exit_cap: f64,
    /// Payoff-unit allowance for discretization bias in every verdict.
    pub discretization_allowance: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_paths: 10_000,
            n_steps: 200,
            seed: 0,
            mode: SimulationMode::ControlledDynamics,
            record_paths: false,
            exit_cap: 0.05,
            discretization_allowance: 0.02,
        }
    }
}

/// How one player picks controls along a path.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// The equilibrium feedback read from the value field.
    Feedback,
    Constant(f64),
    /// Equal-length pieces over `[0, T]`.
    Staircase(Vec<f64>),
    /// `pieces` equal-length pieces with values drawn uniformly from the control set.
    RandomStaircase { seed: u64, pieces: usize },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Feedback => f.write_str("feedback"),
            Strategy::Constant(c) => write!(f, "{c}"),
            Strategy::Staircase(v) => {
                f.write_str("staircase(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            Strategy::RandomStaircase { seed, pieces } => write!(f, "random({seed};{pieces})"),
        }
    }
}

const STAIRCASE_STREAM: u64 = 0x5EED_57A1_2CA5_E000;

impl Strategy {
    /// Control at each of `n_steps` steps; `None` for feedback.
    fn schedule(&self, spec: &GameSpec, player: Player, n_steps: usize) -> Result<Option<Vec<f64>>, McError> {
        let set = spec.control_set(player);
        let pieces: Vec<f64> = match self {
            Strategy::Feedback => return Ok(None),
            Strategy::Constant(c) => vec![*c],
            Strategy::Staircase(v) => v.clone(),
            Strategy::RandomStaircase { seed, pieces } => {
                let mut rng = stream_rng(*seed, STAIRCASE_STREAM);
                (0..*pieces).map(|_| set.sample(uniform(&mut rng))).collect()
            }
        };
        if pieces.is_empty() {
            return Err(McError::InvalidInput(format!("strategy '{self}' has no pieces")));
        }
        if let Some(u) = pieces.iter().find(|u| !set.contains(**u)) {
            return Err(McError::InvalidInput(format!(
                "strategy '{self}' uses control {u} outside the set of player {player}"
            )));
        }
        let len = pieces.len();
        Ok(Some((0..n_steps).map(|k| pieces[(k * len) / n_steps]).collect()))
    }
}

/// Per-player control sources for a simulation.
#[derive(Clone, Debug)]
pub struct ControlSource<'a> {
    fields: Option<&'a ValueField>,
    resolver: Option<FeedbackResolver>,
    strategies: [Strategy; 2],
}

impl<'a> ControlSource<'a> {
    /// Both players on the equilibrium feedback, resolved with ε = 0.
    pub fn feedback(fields: &'a ValueField, resolver: &FeedbackResolver) -> ControlSource<'a> {
        ControlSource {
            fields: Some(fields),
            resolver: Some(resolver.clone().with_epsilon(0.0)),
            strategies: [Strategy::Feedback, Strategy::Feedback],
        }
    }

    /// Open-loop strategies for both players.
    pub fn explicit(s1: Strategy, s2: Strategy) -> ControlSource<'static> {
        ControlSource { fields: None, resolver: None, strategies: [s1, s2] }
    }

    pub fn with_strategy(mut self, player: Player, strategy: Strategy) -> ControlSource<'a> {
        self.strategies[player.index()] = strategy;
        self
    }

    pub fn strategy(&self, player: Player) -> &Strategy {
        &self.strategies[player.index()]
    }
}

/// Simulated paths and their payoff ingredients.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    pub mode: SimulationMode,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dim: usize,
    pub x0: [f64; MAX_DIM],
    pub seed: u64,
    /// `(path * (n_steps + 1) + step) * dim + d`; empty unless recorded.
    pub states: Vec<f64>,
    /// `path * n_steps + step`; empty unless recorded.
    pub controls: Vec<[f64; 2]>,
    /// `M_T − ½⟨M⟩_T` in Girsanov mode, 0 otherwise.
    pub log_weights: Vec<f64>,
    pub running_payoffs: Vec<[f64; 2]>,
    pub terminal_payoffs: Vec<[f64; 2]>,
    /// Path left the value field's box at some step.
    pub exited: Vec<bool>,
    pub warnings: Vec<String>,
}

impl TrajectoryBatch {
    pub fn exit_fraction(&self) -> f64 {
        self.exited.iter().filter(|e| **e).count() as f64 / self.n_paths as f64
    }

    #[inline]
    pub fn weight(&self, path: usize) -> f64 {
        match self.mode {
            SimulationMode::DriftlessGirsanov => exp(self.log_weights[path]),
            SimulationMode::ControlledDynamics => 1.0,
        }
    }

    /// Weighted total payoff of `player` on each path.
    pub fn payoff_samples(&self, player: Player) -> Vec<f64> {
        let i = player.index();
        (0..self.n_paths)
            .map(|p| self.weight(p) * (self.running_payoffs[p][i] + self.terminal_payoffs[p][i]))
            .collect()
    }
}

struct PathOut {
    states: Vec<f64>,
    controls: Vec<[f64; 2]>,
    log_weight: f64,
    running: [f64; 2],
    terminal: [f64; 2],
    exited: bool,
}

/// Paths advanced in lockstep so that one block shares each time level of the field.
const BLOCK: usize = 256;

struct PathState {
    rng: StreamRng,
    x: [f64; MAX_DIM],
    m: f64,
    qv: f64,
    out: PathOut,
    failed: Option<McError>,
}

struct Plan<'a> {
    spec: &'a GameSpec,
    x0: [f64; MAX_DIM],
    opts: &'a McOptions,
    fields: Option<&'a ValueField>,
    resolver: Option<&'a FeedbackResolver>,
    explicit: [Option<Vec<f64>>; 2],
}

impl Plan<'_> {
    fn run_block(&self, block: usize) -> Vec<Result<PathOut, McError>> {
        let first = block * BLOCK;
        let last = (first + BLOCK).min(self.opts.n_paths);
        let mut paths: Vec<PathState> = (first..last)
            .map(|path| {
                let mut out = PathOut {
                    states: Vec::new(),
                    controls: Vec::new(),
                    log_weight: 0.0,
                    running: [0.0; 2],
                    terminal: [0.0; 2],
                    exited: false,
                };
                if self.opts.record_paths {
                    out.states.reserve((self.opts.n_steps + 1) * self.spec.dim);
                    out.controls.reserve(self.opts.n_steps);
                    out.states.extend_from_slice(&self.x0[..self.spec.dim]);
                }
                PathState {
                    rng: stream_rng(self.opts.seed, path as u64),
                    x: self.x0,
                    m: 0.0,
                    qv: 0.0,
                    out,
                    failed: None,
                }
            })
            .collect();
        for k in 0..self.opts.n_steps {
            for (j, st) in paths.iter_mut().enumerate() {
                if st.failed.is_none() {
                    if let Err(e) = self.step(first + j, k, st) {
                        st.failed = Some(e);
                    }
                }
            }
        }
        paths
            .into_iter()
            .enumerate()
            .map(|(j, st)| match st.failed {
                Some(e) => Err(e),
                None => self.finish(first + j, st),
            })
            .collect()
    }

    fn step(&self, path: usize, k: usize, st: &mut PathState) -> Result<(), McError> {
        let spec = self.spec;
        let dim = spec.dim;
        let dt = spec.horizon / self.opts.n_steps as f64;
        let sqdt = sqrt(dt);
        let girsanov = self.opts.mode == SimulationMode::DriftlessGirsanov;
        let t = k as f64 * dt;
        let x = st.x;
        let xs = &x[..dim];
        let mut u = [0.0; 2];
        if self.explicit.iter().any(Option::is_none) {
            let fields = self.fields.expect("feedback strategies carry fields");
            let resolver = self.resolver.expect("feedback strategies carry a resolver");
            let [a, b] = fields.sample_pair_physical(t, xs);
            st.out.exited |= !(a.inside && b.inside);
            let (u1, u2) =
                resolve_feedback(resolver, spec, t, xs, &a.gradient[..dim], &b.gradient[..dim])
                    .map_err(|source| McError::Feedback { path, step: k, source })?;
            u = [u1, u2];
        }
        for i in 0..2 {
            if let Some(s) = &self.explicit[i] {
                u[i] = s[k];
            }
        }
        let f = spec.drift_at(t, xs, u[0], u[1]);
        let sig = spec.sigma_at(t, xs);
        if !is_invertible(&sig, dim) {
            return Err(McError::SingularSigma { path, step: k, x });
        }
        let mut db = [0.0; MAX_DIM];
        for v in db.iter_mut().take(dim) {
            *v = sqdt * normal(&mut st.rng);
        }
        for p in Player::BOTH {
            st.out.running[p.index()] += spec.running_at(p, t, xs, u[0], u[1]) * dt;
        }
        let mut next = x;
        for r in 0..dim {
            let mut noise = 0.0;
            for c in 0..dim {
                noise += sig[r][c] * db[c];
            }
            next[r] += noise;
            if !girsanov {
                next[r] += f[r] * dt;
            }
        }
        if girsanov {
            let theta = solve_small(&sig, &f, dim).ok_or(McError::SingularSigma { path, step: k, x })?;
            for d in 0..dim {
                st.m += theta[d] * db[d];
                st.qv += theta[d] * theta[d] * dt;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(McError::NonFinite { path, step: k + 1 });
        }
        st.x = next;
        if self.opts.record_paths {
            st.out.states.extend_from_slice(&next[..dim]);
            st.out.controls.push(u);
        }
        Ok(())
    }

    fn finish(&self, path: usize, st: PathState) -> Result<PathOut, McError> {
        let mut out = st.out;
        let girsanov = self.opts.mode == SimulationMode::DriftlessGirsanov;
        out.log_weight = if girsanov { st.m - 0.5 * st.qv } else { 0.0 };
        for p in Player::BOTH {
            out.terminal[p.index()] = self.spec.terminal_at(p, &st.x[..self.spec.dim]);
        }
        if !(out.log_weight.is_finite() && out.running.iter().chain(&out.terminal).all(|v| v.is_finite())) {
            return Err(McError::NonFinite { path, step: self.opts.n_steps });
        }
        Ok(out)
    }
}

/// Simulates `opts.n_paths` Euler–Maruyama paths from `x0` over `[0, T]`.
pub fn simulate_paths(
    spec: &GameSpec,
    x0: &[f64],
    opts: &McOptions,
    source: &ControlSource<'_>,
) -> Result<TrajectoryBatch, McError> {
    if opts.n_paths == 0 || opts.n_steps == 0 {
        return Err(McError::InvalidInput("n_paths and n_steps must be >= 1".into()));
    }
    if x0.len() != spec.dim {
        return Err(McError::InvalidInput(format!(
            "x0 has {} components, game dimension is {}",
            x0.len(),
            spec.dim
        )));
    }
    let explicit = [
        source.strategies[0].schedule(spec, Player::One, opts.n_steps)?,
        source.strategies[1].schedule(spec, Player::Two, opts.n_steps)?,
    ];
    let mut warnings = Vec::new();
    if explicit.iter().any(Option::is_none) {
        let fields = source
            .fields
            .ok_or_else(|| McError::InvalidInput("feedback strategy needs a value field".into()))?;
        if fields.grid().dim != spec.dim || fields.grid().horizon != spec.horizon {
            return Err(McError::InvalidInput("value field does not match the game".into()));
        }
        if !opts.n_steps.is_multiple_of(fields.grid().time_steps) {
            warnings.push(format!(
                "MC steps {} do not refine the field's {} time levels; gradients are interpolated in time",
                opts.n_steps,
                fields.grid().time_steps
            ));
        }
    }
    let mut x = [0.0; MAX_DIM];
    x[..spec.dim].copy_from_slice(x0);
    let plan = Plan {
        spec,
        x0: x,
        opts,
        fields: source.fields,
        resolver: source.resolver.as_ref(),
        explicit,
    };
    let blocks = opts.n_paths.div_ceil(BLOCK);
    let results = par_map(blocks, |b| plan.run_block(b)).into_iter().flatten();

    let mut batch = TrajectoryBatch {
        mode: opts.mode,
        n_paths: opts.n_paths,
        n_steps: opts.n_steps,
        dim: spec.dim,
        x0: x,
        seed: opts.seed,
        states: Vec::new(),
        controls: Vec::new(),
        log_weights: Vec::with_capacity(opts.n_paths),
        running_payoffs: Vec::with_capacity(opts.n_paths),
        terminal_payoffs: Vec::with_capacity(opts.n_paths),
        exited: Vec::with_capacity(opts.n_paths),
        warnings,
    };
    for r in results {
        let p = r?;
        batch.states.extend_from_slice(&p.states);
        batch.controls.extend_from_slice(&p.controls);
        batch.log_weights.push(p.log_weight);
        batch.running_payoffs.push(p.running);
        batch.terminal_payoffs.push(p.terminal);
        batch.exited.push(p.exited);
    }
    let frac = batch.exit_fraction();
    if frac > opts.exit_cap {
        batch.warnings.push(format!(
            "{:.2}% of paths left the field's box (cap {:.2}%)",
            100.0 * frac,
            100.0 * opts.exit_cap
        ));
    }
    Ok(batch)
}

/// `(mean, stderr)` with fixed-order summation; stderr is `+∞` for one sample.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffEstimate {
    pub player: Player,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub mode: SimulationMode,
}

/// Monte-Carlo estimate of `J_0^i`.
pub fn estimate_payoff(batch: &TrajectoryBatch, player: Player) -> PayoffEstimate {
    let (mean, stderr) = mean_stderr(&batch.payoff_samples(player));
    PayoffEstimate { player, mean, stderr, n_paths: batch.n_paths, mode: batch.mode }
}

/// Sample mean and stderr of the Girsanov density (1 and 0 in controlled mode).
pub fn weight_estimate(batch: &TrajectoryBatch) -> (f64, f64) {
    let w: Vec<f64> = (0..batch.n_paths).map(|p| batch.weight(p)).collect();
    mean_stderr(&w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GirsanovReport {
    pub girsanov: [PayoffEstimate; 2],
    pub controlled: [PayoffEstimate; 2],
    pub combined_stderr: [f64; 2],
    pub agree: [bool; 2],
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub weight_ok: bool,
}

impl GirsanovReport {
    pub fn passed(&self) -> bool {
        self.agree.iter().all(|a| *a) && self.weight_ok
    }
}

/// Both simulation modes on the same feedback: the Girsanov run uses
/// `opts.seed`, the controlled run an independent derived seed.
pub fn girsanov_consistency(
    spec: &GameSpec,
    fields: &ValueField,
    resolver: &FeedbackResolver,
    x0: &[f64],
    opts: &McOptions,
) -> Result<GirsanovReport, McError> {
    let source = ControlSource::feedback(fields, resolver);
    let g_opts = McOptions { mode: SimulationMode::DriftlessGirsanov, ..opts.clone() };
    let c_opts = McOptions {
        mode: SimulationMode::ControlledDynamics,
        seed: crate::rng::derive_seed(opts.seed, 1),
        ..opts.clone()
    };
    let gb = simulate_paths(spec, x0, &g_opts, &source)?;
    let cb = simulate_paths(spec, x0, &c_opts, &source)?;
    let girsanov = Player::BOTH.map(|p| estimate_payoff(&gb, p));
    let controlled = Player::BOTH.map(|p| estimate_payoff(&cb, p));
    let combined_stderr = [0, 1].map(|i| {
        sqrt(girsanov[i].stderr * girsanov[i].stderr + controlled[i].stderr * controlled[i].stderr)
    });
    let agree = [0, 1].map(|i| (girsanov[i].mean - controlled[i].mean).abs() <= 3.0 * combined_stderr[i]);
    let (weight_mean, weight_stderr) = weight_estimate(&gb);
    Ok(GirsanovReport {
        girsanov,
        controlled,
        combined_stderr,
        agree,
        weight_mean,
        weight_stderr,
        weight_ok: (weight_mean - 1.0).abs() <= 3.0 * weight_stderr,
    })
}

/// A unilateral deviation from the equilibrium feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub id: String,
    pub player: Player,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationResult {
    pub id: String,
    pub player: Player,
    pub estimate: PayoffEstimate,
    /// Equilibrium mean minus deviation mean for the deviating player.
    pub gap: f64,
    /// Stderr of the paired per-path differences.
    pub gap_stderr: f64,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueMatch {
    pub player: Player,
    /// `w_i(0, x0) = V_i(T, x0)`.
    pub pde_value: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashReport {
    pub equilibrium: [PayoffEstimate; 2],
    pub deviations: Vec<DeviationResult>,
    pub value_match: [ValueMatch; 2],
    pub allowance: f64,
    pub exit_fraction: f64,
    pub warnings: Vec<String>,
}

impl NashReport {
    pub fn deviations_pass(&self) -> bool {
        self.deviations.iter().all(|d| d.verdict)
    }

    pub fn value_match_pass(&self) -> bool {
        self.value_match.iter().all(|v| v.pass)
    }
}

fn value_matches(
    fields: &ValueField,
    x0: &[f64],
    equilibrium: &[PayoffEstimate; 2],
    allowance: f64,
) -> [ValueMatch; 2] {
    Player::BOTH.map(|p| {
        let est = &equilibrium[p.index()];
        let pde_value = fields.sample_physical(p, 0.0, x0).value;
        let difference = (pde_value - est.mean).abs();
        let tolerance = 3.0 * est.stderr + allowance;
        ValueMatch {
            player: p,
            pde_value,
            mc_mean: est.mean,
            mc_stderr: est.stderr,
            difference,
            tolerance,
            pass: difference <= tolerance,
        }
    })
}

/// Equilibrium payoffs and one common-random-number run per deviation.
/// A deviation passes when `gap ≥ −(3·gap_stderr + allowance)`.
pub fn deviation_test(
    spec: &GameSpec,
    fields: &ValueField,
    resolver: &FeedbackResolver,
    x0: &[f64],
    deviations: &[Deviation],
    opts: &McOptions,
) -> Result<NashReport, McError> {
    let eq_source = ControlSource::feedback(fields, resolver);
    let eq = simulate_paths(spec, x0, opts, &eq_source)?;
    let equilibrium = Player::BOTH.map(|p| estimate_payoff(&eq, p));
    let eq_samples = Player::BOTH.map(|p| eq.payoff_samples(p));
    let mut warnings = eq.warnings.clone();
    let mut results = Vec::with_capacity(deviations.len());
    for dev in deviations {
        let source = eq_source.clone().with_strategy(dev.player, dev.strategy.clone());
        let batch = simulate_paths(spec, x0, opts, &source)?;
        let samples = batch.payoff_samples(dev.player);
        let diffs: Vec<f64> =
            eq_samples[dev.player.index()].iter().zip(&samples).map(|(a, b)| a - b).collect();
        let (gap, gap_stderr) = mean_stderr(&diffs);
        let (mean, stderr) = mean_stderr(&samples);
        for w in batch.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        results.push(DeviationResult {
            id: dev.id.clone(),
            player: dev.player,
            estimate: PayoffEstimate { player: dev.player, mean, stderr, n_paths: batch.n_paths, mode: batch.mode },
            gap,
            gap_stderr,
            verdict: gap >= -(3.0 * gap_stderr + opts.discretization_allowance),
        });
    }
    Ok(NashReport {
        value_match: value_matches(fields, x0, &equilibrium, opts.discretization_allowance),
        equilibrium,
        deviations: results,
        allowance: opts.discretization_allowance,
        exit_fraction: eq.exit_fraction(),
        warnings,
    })
}

/// Compares `V_i(T, x0)` with the Monte-Carlo equilibrium payoff.
pub fn value_match_test(
    spec: &GameSpec,
    fields: &ValueField,
    resolver: &FeedbackResolver,
    x0: &[f64],
    opts: &McOptions,
) -> Result<[ValueMatch; 2], McError> {
    let batch = simulate_paths(spec, x0, opts, &ControlSource::feedback(fields, resolver))?;
    Ok(value_match_from_batch(fields, &batch, opts.discretization_allowance))
}

/// Value match of an already simulated equilibrium batch.
pub fn value_match_from_batch(fields: &ValueField, batch: &TrajectoryBatch, allowance: f64) -> [ValueMatch; 2] {
    let eq = Player::BOTH.map(|p| estimate_payoff(batch, p));
    value_matches(fields, &batch.x0[..batch.dim], &eq, allowance)
}
