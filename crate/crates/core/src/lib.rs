//! Strong solutions of the two-player HJBI parabolic system and Monte-Carlo
//! verification of the resulting Nash feedback pair.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature (default) pulls
//! in `std` and rayon to fill Monte-Carlo batches on a worker pool; results are
//! bitwise identical with or without it.
//!
//! Layout:
//! - [`dsl`]: expression language for user-supplied coefficient functions.
//! - [`model`]: game data model, built-in scenarios, assumption validation.
//! - [`feedback`]: Hamiltonians, smoothed Heaviside, feedback resolution, GIC sampling.
//! - [`solver`]: finite-difference parabolic solver, Picard loop, expanding domains.
//! - [`montecarlo`]: path simulation, Girsanov weights, Nash and value-match tests.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form on purpose; small fixed-size arrays
// read more clearly with index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dsl;
pub mod feedback;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod solver;

pub(crate) mod math;

/// `(0..n).map(f)` in index order, on the rayon pool when `parallel` is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> alloc::vec::Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> alloc::vec::Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

pub use dsl::{Expr, ParseError};
pub use feedback::{
    check_gic, hamiltonian, resolve_feedback, smoothed_heaviside, FeedbackError, FeedbackMode,
    FeedbackResolver, GicReport, GicSampling,
};
pub use model::{
    builtin_scenario, validate_spec, Coeff, ControlSet, DiffusionMatrixField, GameSpec,
    ModelError, Player, Point, Structure, ValidationReport, MAX_DIM,
};
pub use montecarlo::{
    deviation_test, estimate_payoff, girsanov_consistency, simulate_paths, value_match_from_batch, value_match_test,
    ControlSource, Deviation, DeviationResult, GirsanovReport, McError, McOptions, NashReport,
    PayoffEstimate, SimulationMode, Strategy, TrajectoryBatch, ValueMatch,
};
pub use solver::{
    expanding_domain_solve, growth_check, linear_parabolic_solve, max_principle_check,
    picard_iterate, picard_solve, residual, Grid, PicardOptions, ResidualStats, SolveDiagnostics,
    SolverError, StabilityReport, ValueField,
};
