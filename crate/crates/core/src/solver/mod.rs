//! Finite-difference solution of the HJBI system in inverted time `s = T − t`.
//!
//! `V_s − Σ a_hk V_hk = ∇V·f(ū) + h_i(ū)`, `V(0,·) = g_i`, Dirichlet data `g_i` on
//! the lateral boundary of `[−R, R]^N`. Diffusion is backward Euler (tridiagonal
//! for N=1, one implicit sweep per axis for N=2 with the mixed term explicit),
//! advection is explicit first-order upwind, the source is explicit.

mod checks;
mod field;
mod linear;
mod picard;

pub use checks::{growth_check, max_principle_check, residual, ResidualStats};
pub use field::{FieldSample, ValueField};
pub use linear::{linear_parabolic_solve, solve_tridiagonal, ScalarField};
pub use picard::{
    expanding_domain_solve, picard_iterate, picard_solve, PicardOptions, PicardStage,
    SolveDiagnostics, StabilityReport,
};

use crate::feedback::FeedbackError;
use crate::model::{ModelError, MAX_DIM};
use alloc::format;
use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum SolverError {
    InvalidGrid(String),
    InvalidInput(String),
    /// Explicit advection violates `dt·Σ|f_d|/h ≤ 1`; `ratio` is the worst value.
    Cfl { ratio: f64, level: usize, x: [f64; MAX_DIM] },
    Breakdown { level: usize, line: usize },
    Model(ModelError),
    Feedback { t: f64, x: [f64; MAX_DIM], source: FeedbackError },
    /// Data is not bounded; use the growth check instead.
    UnboundedData,
    NonFinite { level: usize, x: [f64; MAX_DIM] },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::InvalidGrid(m) => write!(f, "invalid grid: {m}"),
            SolverError::InvalidInput(m) => write!(f, "invalid solver input: {m}"),
            SolverError::Cfl { ratio, level, x } => write!(
                f,
                "CFL violated: dt*|f|/h = {ratio:.4} > 1 at level {level}, x = {x:?}; refine dt"
            ),
            SolverError::Breakdown { level, line } => {
                write!(f, "tridiagonal solve broke down at level {level}, line {line}")
            }
            SolverError::Model(e) => write!(f, "{e}"),
            SolverError::Feedback { t, x, source } => {
                write!(f, "feedback failed at (t,x)=({t}, {x:?}): {source}")
            }
            SolverError::UnboundedData => f.write_str(
                "maximum-principle bound needs bounded data; use growth_check for affine-unbounded games",
            ),
            SolverError::NonFinite { level, x } => {
                write!(f, "solution became non-finite at level {level}, x = {x:?}")
            }
        }
    }
}

impl core::error::Error for SolverError {}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        SolverError::Model(e)
    }
}

/// Uniform space-time grid on `[−R, R]^N × [0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub radius: f64,
    pub nodes_per_axis: usize,
    pub time_steps: usize,
    pub horizon: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(
        dim: usize,
        radius: f64,
        nodes_per_axis: usize,
        time_steps: usize,
        horizon: f64,
    ) -> Result<Grid, SolverError> {
        let bad = |m: String| Err(SolverError::InvalidGrid(m));
        if !(1..=MAX_DIM).contains(&dim) {
            return bad(format!("dimension {dim} not supported (1 or 2)"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return bad(format!("radius must be positive, got {radius}"));
        }
        if nodes_per_axis < 3 || nodes_per_axis.is_multiple_of(2) {
            return bad(format!("nodes per axis must be odd and >= 3, got {nodes_per_axis}"));
        }
        if time_steps == 0 {
            return bad("time steps must be >= 1".into());
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return bad(format!("horizon must be positive, got {horizon}"));
        }
        let spacing = 2.0 * radius / (nodes_per_axis - 1) as f64;
        Ok(Grid { dim, radius, nodes_per_axis, time_steps, horizon, spacing })
    }

    /// Grid with spacing closest to `spacing` (odd node count, so 0 is a node).
    pub fn with_spacing(
        dim: usize,
        radius: f64,
        spacing: f64,
        time_steps: usize,
        horizon: f64,
    ) -> Result<Grid, SolverError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(SolverError::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let half = crate::math::round(radius / spacing).max(1.0) as usize;
        Grid::new(dim, radius, 2 * half + 1, time_steps, horizon)
    }

    /// Same spacing and time grid on a box of (about) radius `radius`. The
    /// radius is snapped to a whole number of cells so node coordinates agree
    /// with this grid's on the common part.
    pub fn with_radius(&self, radius: f64) -> Result<Grid, SolverError> {
        let h = self.spacing;
        let half = crate::math::round(radius / h).max(1.0) as usize;
        let mut g = Grid::new(self.dim, half as f64 * h, 2 * half + 1, self.time_steps, self.horizon)?;
        g.spacing = h;
        Ok(g)
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    #[inline]
    pub fn levels(&self) -> usize {
        self.time_steps + 1
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        crate::math::powi(self.nodes_per_axis as f64, self.dim as i32) as usize
    }

    #[inline]
    fn center(&self) -> usize {
        (self.nodes_per_axis - 1) / 2
    }

    /// Coordinate of axis index `i`; endpoints are exactly `∓R`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        let c = self.center();
        if i == 0 {
            -self.radius
        } else if i + 1 == self.nodes_per_axis {
            self.radius
        } else {
            (i as f64 - c as f64) * self.spacing()
        }
    }

    /// Inverted time of level `k`.
    #[inline]
    pub fn s(&self, level: usize) -> f64 {
        if level == self.time_steps {
            self.horizon
        } else {
            level as f64 * self.dt()
        }
    }

    /// Axis indices of a node (row-major, last axis fastest).
    #[inline]
    pub fn axis_indices(&self, node: usize) -> [usize; MAX_DIM] {
        if self.dim == 1 {
            [node, 0]
        } else {
            [node / self.nodes_per_axis, node % self.nodes_per_axis]
        }
    }

    #[inline]
    pub fn node_index(&self, idx: [usize; MAX_DIM]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.nodes_per_axis + idx[1]
        }
    }

    #[inline]
    pub fn node_coords(&self, node: usize) -> [f64; MAX_DIM] {
        let idx = self.axis_indices(node);
        let mut x = [0.0; MAX_DIM];
        for d in 0..self.dim {
            x[d] = self.coord(idx[d]);
        }
        x
    }

    #[inline]
    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.axis_indices(node);
        (0..self.dim).any(|d| idx[d] == 0 || idx[d] + 1 == self.nodes_per_axis)
    }
}
