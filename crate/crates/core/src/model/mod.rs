//! Game data model: coefficient functions, control sets, the game description
//! and the diffusion matrix `a = ½σσᵀ`.

mod scenarios;
mod validate;

pub use scenarios::{builtin_scenario, builtin_source, BUILTIN_SCENARIOS};
pub use validate::{validate_spec, ValidationReport, GROWTH_PATHOLOGY};

use crate::dsl::{self, Expr};
use crate::math;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// Largest supported state dimension.
pub const MAX_DIM: usize = 2;

/// Arguments of every coefficient function. Each coefficient reads only the
/// fields its role declares.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub t: f64,
    pub x: [f64; MAX_DIM],
    pub u1: f64,
    pub u2: f64,
    pub p1: [f64; MAX_DIM],
    pub p2: [f64; MAX_DIM],
    pub eps: f64,
}

/// DSL variable names in slot order; see [`Point::slots`].
pub const POINT_VARS: [&str; 10] = ["t", "x1", "x2", "u1", "u2", "p1", "p2", "p1_2", "p2_2", "eps"];

impl Point {
    pub fn at(t: f64, x: &[f64]) -> Point {
        let mut p = Point { t, ..Point::default() };
        p.x[..x.len()].copy_from_slice(x);
        p
    }

    pub fn with_controls(mut self, u1: f64, u2: f64) -> Point {
        self.u1 = u1;
        self.u2 = u2;
        self
    }

    pub fn with_gradients(mut self, p1: &[f64], p2: &[f64]) -> Point {
        self.p1[..p1.len()].copy_from_slice(p1);
        self.p2[..p2.len()].copy_from_slice(p2);
        self
    }

    #[inline]
    pub fn slots(&self) -> [f64; 10] {
        [
            self.t, self.x[0], self.x[1], self.u1, self.u2, self.p1[0], self.p2[0], self.p1[1],
            self.p2[1], self.eps,
        ]
    }
}

/// What a coefficient is allowed to depend on; fixes the declared DSL variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffRole {
    /// σ entries: (t, x)
    Diffusion,
    /// drift components and running payoffs: (t, x, u1, u2)
    Dynamics,
    /// terminal payoffs: x
    Terminal,
    /// closed-form feedbacks: (t, x, p1, p2, eps)
    Feedback,
}

impl CoeffRole {
    pub fn declared_vars(self, dim: usize) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self != CoeffRole::Terminal {
            v.push("t");
        }
        v.push("x1");
        if dim > 1 {
            v.push("x2");
        }
        match self {
            CoeffRole::Dynamics => v.extend(["u1", "u2"]),
            CoeffRole::Feedback => {
                v.extend(["p1", "p2"]);
                if dim > 1 {
                    v.extend(["p1_2", "p2_2"]);
                }
                v.push("eps");
            }
            _ => {}
        }
        v
    }
}

type CoeffFn = dyn Fn(&Point) -> f64 + Send + Sync;

/// A scalar coefficient function, either native or compiled from a DSL body.
/// DSL evaluation faults surface as NaN and are caught by the validators.
#[derive(Clone)]
pub struct Coeff {
    func: Arc<CoeffFn>,
    expr: Option<Arc<Expr>>,
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            Some(e) => write!(f, "Coeff({e})"),
            None => f.write_str("Coeff(<native>)"),
        }
    }
}

impl Coeff {
    pub fn native(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Coeff {
        Coeff { func: Arc::new(f), expr: None }
    }

    pub fn constant(c: f64) -> Coeff {
        Coeff::native(move |_| c)
    }

    /// Parses `text` with the variables `role` declares in dimension `dim`.
    pub fn parse(text: &str, role: CoeffRole, dim: usize) -> Result<Coeff, dsl::ParseError> {
        let vars = role.declared_vars(dim);
        let expr = dsl::parse(text, &vars)?;
        Ok(Coeff::from_expr(expr))
    }

    fn from_expr(expr: Expr) -> Coeff {
        let mut slotted = expr.clone();
        slotted
            .remap_vars(&|name| POINT_VARS.iter().position(|v| *v == name))
            .expect("declared variables are a subset of the point slots");
        let func = move |p: &Point| dsl::eval_slots_infallible(&slotted, &p.slots());
        Coeff { func: Arc::new(func), expr: Some(Arc::new(expr)) }
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        (self.func)(p)
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_deref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Player> {
        match n {
            1 => Some(Player::One),
            2 => Some(Player::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Compact scalar control set with the grid used for argmax searches.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSet {
    Interval { lower: f64, upper: f64, grid_points: usize },
    FiniteGrid { points: Vec<f64> },
}

/// Default argmax resolution per control axis.
pub const DEFAULT_GRID_POINTS: usize = 33;

impl ControlSet {
    pub fn interval(lower: f64, upper: f64) -> Result<ControlSet, ModelError> {
        ControlSet::interval_with_grid(lower, upper, DEFAULT_GRID_POINTS)
    }

    pub fn interval_with_grid(
        lower: f64,
        upper: f64,
        grid_points: usize,
    ) -> Result<ControlSet, ModelError> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(ModelError::Invalid(alloc::format!(
                "control interval [{lower}, {upper}] is empty or not finite"
            )));
        }
        if grid_points < 2 {
            return Err(ModelError::Invalid("control grid needs at least 2 points".into()));
        }
        Ok(ControlSet::Interval { lower, upper, grid_points })
    }

    pub fn finite(mut points: Vec<f64>) -> Result<ControlSet, ModelError> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Invalid("finite control grid must be nonempty and finite".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(ControlSet::FiniteGrid { points })
    }

    pub fn lower(&self) -> f64 {
        match self {
            ControlSet::Interval { lower, .. } => *lower,
            ControlSet::FiniteGrid { points } => points[0],
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            ControlSet::Interval { upper, .. } => *upper,
            ControlSet::FiniteGrid { points } => points[points.len() - 1],
        }
    }

    /// Discretization used by argmax searches, endpoints included, ascending.
    pub fn grid(&self) -> Vec<f64> {
        match self {
            ControlSet::Interval { lower, upper, grid_points } => {
                let n = *grid_points;
                (0..n)
                    .map(|k| {
                        if k + 1 == n {
                            *upper
                        } else {
                            lower + (upper - lower) * k as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            }
            ControlSet::FiniteGrid { points } => points.clone(),
        }
    }

    pub fn contains(&self, u: f64) -> bool {
        let tol = 1e-12 * (1.0 + self.lower().abs().max(self.upper().abs()));
        match self {
            ControlSet::Interval { lower, upper, .. } => u >= lower - tol && u <= upper + tol,
            ControlSet::FiniteGrid { points } => points.iter().any(|p| (p - u).abs() <= tol),
        }
    }

    pub fn is_unit_interval(&self) -> bool {
        matches!(self, ControlSet::Interval { lower, upper, .. } if *lower == 0.0 && *upper == 1.0)
    }

    /// Maps a uniform draw in `[0, 1)` into the set.
    pub fn sample(&self, unit: f64) -> f64 {
        match self {
            ControlSet::Interval { lower, upper, .. } => lower + (upper - lower) * unit,
            ControlSet::FiniteGrid { points } => {
                let k = ((unit * points.len() as f64) as usize).min(points.len() - 1);
                points[k]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    General,
    /// drift = f1(t,x,u1) + f2(t,x,u2) and h_i depends on u_i only
    Separated,
    /// drift = f1(t,x)u1 + f2(t,x)u2, h_i = h_i(t,x)u_i, U1 = U2 = [0,1]
    AffineBangBang,
    /// as AffineBangBang plus φ(t,x) in the drift, with polynomial-growth data
    AffineUnbounded,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::General => "general",
            Structure::Separated => "separated",
            Structure::AffineBangBang => "affine-bang-bang",
            Structure::AffineUnbounded => "affine-unbounded",
        }
    }

    pub fn from_name(s: &str) -> Option<Structure> {
        [
            Structure::General,
            Structure::Separated,
            Structure::AffineBangBang,
            Structure::AffineUnbounded,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    pub fn is_affine(self) -> bool {
        matches!(self, Structure::AffineBangBang | Structure::AffineUnbounded)
    }

    /// Player-wise decoupled argmax is valid.
    pub fn is_separated(self) -> bool {
        self != Structure::General
    }

    pub fn has_bounded_data(self) -> bool {
        self != Structure::AffineUnbounded
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Invalid(String),
    SingularSigma { t: f64, x: [f64; MAX_DIM] },
    NonFinite { what: String, t: f64, x: [f64; MAX_DIM] },
    Parse { what: String, error: dsl::ParseError },
    UnknownScenario { name: String, available: Vec<&'static str> },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Invalid(m) => write!(f, "invalid game: {m}"),
            ModelError::SingularSigma { t, x } => {
                write!(f, "sigma not invertible at (t,x)=({t}, {x:?})")
            }
            ModelError::NonFinite { what, t, x } => {
                write!(f, "{what} is not finite at (t,x)=({t}, {x:?})")
            }
            ModelError::Parse { what, error } => write!(f, "in {what}: {error}"),
            ModelError::UnknownScenario { name, available } => {
                write!(f, "unknown scenario '{name}'; available: {}", available.join(", "))
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// Complete description of one game.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub name: String,
    pub dim: usize,
    pub horizon: f64,
    /// Row-major `dim × dim`.
    pub sigma: Vec<Coeff>,
    pub drift: Vec<Coeff>,
    pub running_payoff: [Coeff; 2],
    pub terminal_payoff: [Coeff; 2],
    pub controls: [ControlSet; 2],
    pub structure: Structure,
    pub growth_exponent: f64,
    pub feedback_closed_form: Option<[Coeff; 2]>,
}

pub type Mat = [[f64; MAX_DIM]; MAX_DIM];

impl GameSpec {
    /// Checks shapes and the structural requirements on control sets.
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if !(1..=MAX_DIM).contains(&self.dim) {
            return bad(alloc::format!("dimension {} not supported (1 or 2)", self.dim));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(alloc::format!("horizon must be positive, got {}", self.horizon));
        }
        if self.sigma.len() != self.dim * self.dim {
            return bad(alloc::format!("sigma needs {} entries", self.dim * self.dim));
        }
        if self.drift.len() != self.dim {
            return bad(alloc::format!("drift needs {} components", self.dim));
        }
        if !(self.growth_exponent >= 1.0) {
            return bad("growth exponent must be >= 1".into());
        }
        if self.structure.is_affine() && !self.controls.iter().all(ControlSet::is_unit_interval) {
            return bad("affine structures require U1 = U2 = [0,1]".into());
        }
        Ok(())
    }

    pub fn sigma_at(&self, t: f64, x: &[f64]) -> Mat {
        let p = Point::at(t, x);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for r in 0..self.dim {
            for c in 0..self.dim {
                m[r][c] = self.sigma[r * self.dim + c].eval(&p);
            }
        }
        m
    }

    /// Drift at `(t, x, u1, u2)`; entries past `dim` are zero.
    #[inline]
    pub fn drift_at(&self, t: f64, x: &[f64], u1: f64, u2: f64) -> [f64; MAX_DIM] {
        let p = Point::at(t, x).with_controls(u1, u2);
        let mut out = [0.0; MAX_DIM];
        for (o, f) in out.iter_mut().zip(&self.drift) {
            *o = f.eval(&p);
        }
        out
    }

    #[inline]
    pub fn running_at(&self, player: Player, t: f64, x: &[f64], u1: f64, u2: f64) -> f64 {
        self.running_payoff[player.index()].eval(&Point::at(t, x).with_controls(u1, u2))
    }

    #[inline]
    pub fn terminal_at(&self, player: Player, x: &[f64]) -> f64 {
        self.terminal_payoff[player.index()].eval(&Point::at(0.0, x))
    }

    pub fn control_set(&self, player: Player) -> &ControlSet {
        &self.controls[player.index()]
    }

    /// Bang-bang switching argument `p·f_i(t,x) + h_i(t,x)` for affine
    /// structures, read off as `H_i(u_i = 1) − H_i(u_i = 0)`.
    pub fn switching_argument(&self, player: Player, t: f64, x: &[f64], p: &[f64]) -> f64 {
        let (on, off) = match player {
            Player::One => ((1.0, 0.0), (0.0, 0.0)),
            Player::Two => ((0.0, 1.0), (0.0, 0.0)),
        };
        let f_on = self.drift_at(t, x, on.0, on.1);
        let f_off = self.drift_at(t, x, off.0, off.1);
        let mut s = self.running_at(player, t, x, on.0, on.1)
            - self.running_at(player, t, x, off.0, off.1);
        for d in 0..self.dim {
            s += p[d] * (f_on[d] - f_off[d]);
        }
        s
    }
}

/// Solves `m y = b` for the leading `dim` block; `None` when singular.
pub fn solve_small(m: &Mat, b: &[f64; MAX_DIM], dim: usize) -> Option<[f64; MAX_DIM]> {
    match dim {
        1 => {
            if m[0][0] == 0.0 || !m[0][0].is_finite() {
                None
            } else {
                Some([b[0] / m[0][0], 0.0])
            }
        }
        _ => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !is_invertible(m, dim) {
                return None;
            }
            Some([
                (b[0] * m[1][1] - m[0][1] * b[1]) / det,
                (m[0][0] * b[1] - m[1][0] * b[0]) / det,
            ])
        }
    }
}

/// Determinant test relative to the entry scale.
pub fn is_invertible(m: &Mat, dim: usize) -> bool {
    let mut scale: f64 = 0.0;
    for r in m.iter().take(dim) {
        for v in r.iter().take(dim) {
            if !v.is_finite() {
                return false;
            }
            scale = scale.max(v.abs());
        }
    }
    if scale == 0.0 {
        return false;
    }
    let det = if dim == 1 { m[0][0] } else { m[0][0] * m[1][1] - m[0][1] * m[1][0] };
    det.abs() > 1e-12 * math::powi(scale, dim as i32)
}

/// `a = ½ σ σᵀ` evaluated pointwise from the game's σ, with ellipticity bounds
/// established over the points it was constructed on.
#[derive(Clone, Debug)]
pub struct DiffusionMatrixField {
    dim: usize,
    sigma: Vec<Coeff>,
    /// Smallest eigenvalue of `a` seen during construction.
    pub ellipticity_lower: f64,
    /// Largest eigenvalue of `a` seen during construction.
    pub ellipticity_upper: f64,
}

impl DiffusionMatrixField {
    /// Builds the field and certifies ellipticity on `points`.
    pub fn new<I>(spec: &GameSpec, points: I) -> Result<DiffusionMatrixField, ModelError>
    where
        I: IntoIterator<Item = (f64, [f64; MAX_DIM])>,
    {
        let mut field = DiffusionMatrixField {
            dim: spec.dim,
            sigma: spec.sigma.clone(),
            ellipticity_lower: f64::INFINITY,
            ellipticity_upper: 0.0,
        };
        for (t, x) in points {
            let s = spec.sigma_at(t, &x[..spec.dim]);
            if s.iter().flatten().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { what: "sigma".into(), t, x });
            }
            if !is_invertible(&s, spec.dim) {
                return Err(ModelError::SingularSigma { t, x });
            }
            let (lo, hi) = eigen_bounds(&half_sigma_sigma_t(&s, spec.dim), spec.dim);
            field.ellipticity_lower = field.ellipticity_lower.min(lo);
            field.ellipticity_upper = field.ellipticity_upper.max(hi);
        }
        if !(field.ellipticity_lower > 0.0) {
            return Err(ModelError::Invalid("diffusion matrix is not uniformly elliptic".into()));
        }
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, t: f64, x: &[f64]) -> Mat {
        let p = Point::at(t, x);
        let mut s = [[0.0; MAX_DIM]; MAX_DIM];
        for r in 0..self.dim {
            for c in 0..self.dim {
                s[r][c] = self.sigma[r * self.dim + c].eval(&p);
            }
        }
        half_sigma_sigma_t(&s, self.dim)
    }
}

pub fn half_sigma_sigma_t(s: &Mat, dim: usize) -> Mat {
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    for h in 0..dim {
        for k in 0..dim {
            let mut acc = 0.0;
            for j in 0..dim {
                acc += s[h][j] * s[k][j];
            }
            a[h][k] = 0.5 * acc;
        }
    }
    a
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn eigen_bounds(a: &Mat, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    let r = math::sqrt(half_diff * half_diff + a[0][1] * a[0][1]);
    (mean - r, mean + r)
}

/// Owned, textual form of a game: every coefficient is a DSL body.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecSource {
    pub name: String,
    pub dim: usize,
    pub horizon: f64,
    pub sigma: Vec<String>,
    pub drift: Vec<String>,
    pub running_payoff: [String; 2],
    pub terminal_payoff: [String; 2],
    pub controls: [ControlSet; 2],
    pub structure: Structure,
    pub growth_exponent: f64,
    pub feedback: Option<[String; 2]>,
}

impl SpecSource {
    pub fn build(&self) -> Result<GameSpec, ModelError> {
        let dim = self.dim;
        let parse = |what: String, text: &str, role| {
            Coeff::parse(text, role, dim).map_err(|error| ModelError::Parse { what, error })
        };
        let list = |name: &str, items: &[String], role| -> Result<Vec<Coeff>, ModelError> {
            items
                .iter()
                .enumerate()
                .map(|(k, s)| parse(alloc::format!("{name}[{k}]"), s, role))
                .collect()
        };
        let pair = |name: &str, items: &[String; 2], role| -> Result<[Coeff; 2], ModelError> {
            Ok([
                parse(alloc::format!("{name}1"), &items[0], role)?,
                parse(alloc::format!("{name}2"), &items[1], role)?,
            ])
        };
        let spec = GameSpec {
            name: self.name.clone(),
            dim,
            horizon: self.horizon,
            sigma: list("sigma", &self.sigma, CoeffRole::Diffusion)?,
            drift: list("drift", &self.drift, CoeffRole::Dynamics)?,
            running_payoff: pair("h", &self.running_payoff, CoeffRole::Dynamics)?,
            terminal_payoff: pair("g", &self.terminal_payoff, CoeffRole::Terminal)?,
            controls: self.controls.clone(),
            structure: self.structure,
            growth_exponent: self.growth_exponent,
            feedback_closed_form: match &self.feedback {
                Some(fb) => Some(pair("feedback", fb, CoeffRole::Feedback)?),
                None => None,
            },
        };
        spec.check()?;
        if spec.structure == Structure::Separated {
            // u2 must not appear in h1, nor u1 in h2
            for (player, foreign) in [(0, "u2"), (1, "u1")] {
                let vars = spec.running_payoff[player].expr().map(|e| e.free_vars());
                if vars.is_some_and(|v| v.contains(foreign)) {
                    return Err(ModelError::Invalid(alloc::format!(
                        "separated structure: h{} depends on {foreign}",
                        player + 1
                    )));
                }
            }
        }
        Ok(spec)
    }
}
