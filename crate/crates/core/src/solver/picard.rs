use super::checks::{growth_check, max_principle_check, residual, ResidualStats};
use super::field::{gradient_of, ValueField};
use super::linear::march;
use super::{Grid, SolverError};
use crate::feedback::{resolve_feedback, FeedbackResolver};
use crate::model::{DiffusionMatrixField, GameSpec, Player};
use crate::par_map;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct PicardOptions {
    /// Stop when `max(sup|ΔV|, sup|Δ∇V|) ≤ tolerance`.
    pub tolerance: f64,
    /// Per smoothing stage.
    pub max_iterations: usize,
    /// Smoothing widths, solved in order with warm starts. Only used by
    /// closed-form resolvers on affine games; empty means the resolver's own ε.
    pub epsilon_schedule: Vec<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { tolerance: 1e-5, max_iterations: 100, epsilon_schedule: Vec::new() }
    }
}

impl PicardOptions {
    fn check(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidInput("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidInput("max_iterations must be >= 1".into()));
        }
        if self.epsilon_schedule.iter().any(|e| !(*e >= 0.0)) {
            return Err(SolverError::InvalidInput("smoothing widths must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outer iterations at one smoothing width.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardStage {
    pub epsilon: f64,
    pub value_changes: Vec<f64>,
    pub gradient_changes: Vec<f64>,
    pub converged: bool,
}

impl PicardStage {
    /// `max(value change, gradient change)` per iteration.
    pub fn residuals(&self) -> Vec<f64> {
        self.value_changes.iter().zip(&self.gradient_changes).map(|(v, g)| v.max(*g)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    pub stages: Vec<PicardStage>,
    pub iterations_used: usize,
    pub tolerance: f64,
    /// The final stage reached the tolerance.
    pub converged: bool,
    /// `None` for unbounded data.
    pub max_principle_margin: Option<f64>,
    pub growth_constant: f64,
    pub residual: ResidualStats,
}

impl SolveDiagnostics {
    pub fn final_stage(&self) -> &PicardStage {
        self.stages.last().expect("at least one stage")
    }

    pub fn epsilon_schedule(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.epsilon).collect()
    }

    /// Residuals of the final stage.
    pub fn picard_residuals(&self) -> Vec<f64> {
        self.final_stage().residuals()
    }

    /// Strictly decreasing over the last `window` iterations of the final
    /// stage (fewer if the stage was shorter). Exact zeros count as decreasing.
    pub fn tail_is_decreasing(&self, window: usize) -> bool {
        let r = self.picard_residuals();
        let tail = &r[r.len().saturating_sub(window)..];
        tail.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0)
    }
}

/// Shared data of one Dirichlet problem.
struct Problem<'a> {
    spec: &'a GameSpec,
    grid: Grid,
    a_field: DiffusionMatrixField,
    terminal: [Vec<f64>; 2],
}

impl<'a> Problem<'a> {
    fn new(spec: &'a GameSpec, grid: &Grid) -> Result<Problem<'a>, SolverError> {
        if spec.dim != grid.dim {
            return Err(SolverError::InvalidInput(alloc::format!(
                "grid dimension {} differs from game dimension {}",
                grid.dim,
                spec.dim
            )));
        }
        if spec.horizon != grid.horizon {
            return Err(SolverError::InvalidInput(alloc::format!(
                "grid horizon {} differs from game horizon {}",
                grid.horizon,
                spec.horizon
            )));
        }
        let n = grid.n_nodes();
        let stride = (grid.levels() / 16).max(1);
        let times: Vec<f64> = (0..grid.levels())
            .filter(|k| k % stride == 0 || *k == grid.time_steps)
            .map(|k| grid.horizon - grid.s(k))
            .collect();
        let points = times.iter().flat_map(|&t| (0..n).map(move |node| (t, grid.node_coords(node))));
        let a_field = DiffusionMatrixField::new(spec, points)?;
        let terminal = Player::BOTH.map(|p| {
            (0..n)
                .map(|node| spec.terminal_at(p, &grid.node_coords(node)[..grid.dim]))
                .collect::<Vec<f64>>()
        });
        for (p, g) in terminal.iter().enumerate() {
            if let Some(node) = g.iter().position(|v| !v.is_finite()) {
                return Err(SolverError::Model(crate::model::ModelError::NonFinite {
                    what: alloc::format!("g{}", p + 1),
                    t: spec.horizon,
                    x: grid.node_coords(node),
                }));
            }
        }
        Ok(Problem { spec, grid: *grid, a_field, terminal })
    }

    fn initial(&self) -> ValueField {
        ValueField::constant_in_time(self.grid, [&self.terminal[0], &self.terminal[1]])
    }

    /// One outer iteration: feedbacks from `prev`'s gradients, then two linear solves.
    fn iterate(&self, resolver: &FeedbackResolver, prev: &ValueField) -> Result<ValueField, SolverError> {
        let grid = &self.grid;
        let spec = self.spec;
        let (n, dim) = (grid.n_nodes(), grid.dim);
        let per_level = par_map(grid.time_steps, |k| -> Result<_, SolverError> {
            let t = grid.horizon - grid.s(k);
            let mut f = vec![0.0; n * dim];
            let mut h = [vec![0.0; n], vec![0.0; n]];
            for node in 0..n {
                if grid.is_boundary(node) {
                    continue;
                }
                let x = grid.node_coords(node);
                let xs = &x[..dim];
                let p1 = prev.gradient(Player::One, k, node);
                let p2 = prev.gradient(Player::Two, k, node);
                let (u1, u2) = resolve_feedback(resolver, spec, t, xs, &p1[..dim], &p2[..dim])
                    .map_err(|source| SolverError::Feedback { t, x, source })?;
                let fx = spec.drift_at(t, xs, u1, u2);
                f[node * dim..(node + 1) * dim].copy_from_slice(&fx[..dim]);
                h[0][node] = spec.running_at(Player::One, t, xs, u1, u2);
                h[1][node] = spec.running_at(Player::Two, t, xs, u1, u2);
            }
            Ok((f, h))
        });
        let levels = grid.levels();
        let mut drift = Vec::with_capacity(levels * n * dim);
        let mut src = [Vec::with_capacity(levels * n), Vec::with_capacity(levels * n)];
        for r in per_level {
            let (f, [h1, h2]) = r?;
            drift.extend_from_slice(&f);
            src[0].extend_from_slice(&h1);
            src[1].extend_from_slice(&h2);
        }
        // the last level is never used by the march
        drift.resize(levels * n * dim, 0.0);
        src[0].resize(levels * n, 0.0);
        src[1].resize(levels * n, 0.0);

        let mut out = march(
            grid,
            &self.a_field,
            &drift,
            &[&src[0], &src[1]],
            &[&self.terminal[0], &self.terminal[1]],
        )?;
        let v2 = out.pop().expect("two equations");
        let v1 = out.pop().expect("two equations");
        let gradients = [gradient_of(grid, &v1), gradient_of(grid, &v2)];
        Ok(ValueField::from_parts(*grid, [v1, v2], gradients))
    }
}

/// Applies one more outer iteration to `field`.
pub fn picard_iterate(
    spec: &GameSpec,
    resolver: &FeedbackResolver,
    field: &ValueField,
) -> Result<ValueField, SolverError> {
    Problem::new(spec, field.grid())?.iterate(resolver, field)
}

fn widths(spec: &GameSpec, resolver: &FeedbackResolver, opts: &PicardOptions) -> Vec<f64> {
    if resolver.uses_smoothing(spec) && !opts.epsilon_schedule.is_empty() {
        opts.epsilon_schedule.clone()
    } else {
        vec![resolver.smoothing_epsilon]
    }
}

/// Picard iteration from `V⁰ ≡ g`, run once per smoothing width. Refinement
/// of ε stops early when two consecutive stage results differ by less than
/// `10·tolerance`. Non-convergence is reported, not raised.
pub fn picard_solve(
    spec: &GameSpec,
    grid: &Grid,
    resolver: &FeedbackResolver,
    opts: &PicardOptions,
) -> Result<(ValueField, SolveDiagnostics), SolverError> {
    opts.check()?;
    resolver
        .check_compatible(spec)
        .map_err(|e| SolverError::InvalidInput(alloc::format!("{e}")))?;
    let problem = Problem::new(spec, grid)?;
    let mut field = problem.initial();
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut previous_stage: Option<ValueField> = None;
    let mut last_resolver = resolver.clone();

    for eps in widths(spec, resolver, opts) {
        let r = resolver.clone().with_epsilon(eps);
        let mut stage = PicardStage {
            epsilon: eps,
            value_changes: Vec::new(),
            gradient_changes: Vec::new(),
            converged: false,
        };
        for _ in 0..opts.max_iterations {
            let next = problem.iterate(&r, &field)?;
            let (dv, dg) = next.sup_changes(&field);
            field = next;
            iterations += 1;
            stage.value_changes.push(dv);
            stage.gradient_changes.push(dg);
            if dv.max(dg) <= opts.tolerance {
                stage.converged = true;
                break;
            }
        }
        stages.push(stage);
        last_resolver = r;
        if let Some(prev) = &previous_stage {
            let (dv, _) = field.sup_changes(prev);
            if dv < 10.0 * opts.tolerance {
                break;
            }
        }
        previous_stage = Some(field.clone());
    }

    let max_principle_margin = match max_principle_check(spec, &field) {
        Ok(m) => Some(m),
        Err(SolverError::UnboundedData) => None,
        Err(e) => return Err(e),
    };
    let diagnostics = SolveDiagnostics {
        converged: stages.last().is_some_and(|s: &PicardStage| s.converged),
        stages,
        iterations_used: iterations,
        tolerance: opts.tolerance,
        max_principle_margin,
        growth_constant: growth_check(spec, &field),
        residual: residual(spec, &field, &last_resolver)?,
    };
    Ok((field, diagnostics))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// Radii actually used (snapped to whole cells).
    pub radii: Vec<f64>,
    pub core_radius: f64,
    /// Core sup-difference between consecutive radii.
    pub core_differences: Vec<f64>,
    /// `max |V|/(1 + |x|^β)` per radius.
    pub growth_constants: Vec<f64>,
    pub diagnostics: Vec<SolveDiagnostics>,
}

impl StabilityReport {
    pub fn all_converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }

    pub fn differences_decreasing(&self) -> bool {
        self.core_differences.windows(2).all(|w| w[1] < w[0])
    }

    /// `(max − min)/max` of the growth constants.
    pub fn growth_variation(&self) -> f64 {
        let hi = self.growth_constants.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.growth_constants.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    }
}

/// Solves on `[−R, R]^N` for each radius at the base grid's spacing and
/// compares consecutive solutions on the core box of radius `core_radius`
/// (default: the smallest radius).
pub fn expanding_domain_solve(
    spec: &GameSpec,
    base_grid: &Grid,
    radii: &[f64],
    core_radius: Option<f64>,
    resolver: &FeedbackResolver,
    opts: &PicardOptions,
) -> Result<(ValueField, StabilityReport), SolverError> {
    if radii.is_empty() {
        return Err(SolverError::InvalidInput("radius list is empty".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::InvalidInput("radii must be strictly increasing".into()));
    }
    let core = core_radius.unwrap_or(radii[0]);
    if !(core > 0.0 && core <= radii[0]) {
        return Err(SolverError::InvalidInput(alloc::format!(
            "core radius {core} must lie in (0, {}]",
            radii[0]
        )));
    }
    let mut report = StabilityReport {
        radii: Vec::new(),
        core_radius: core,
        core_differences: Vec::new(),
        growth_constants: Vec::new(),
        diagnostics: Vec::new(),
    };
    let mut last: Option<ValueField> = None;
    for &r in radii {
        let grid = base_grid.with_radius(r)?;
        let (field, diag) = picard_solve(spec, &grid, resolver, opts)?;
        if let Some(prev) = &last {
            report.core_differences.push(field.core_sup_difference(prev, core)?);
        }
        report.radii.push(grid.radius);
        report.growth_constants.push(diag.growth_constant);
        report.diagnostics.push(diag);
        last = Some(field);
    }
    Ok((last.expect("nonempty radii"), report))
}
