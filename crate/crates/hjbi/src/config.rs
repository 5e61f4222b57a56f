//! Run configuration: TOML sections, `--set` overrides and per-scenario defaults.
//!
//! A config file has up to five sections, all optional:
//!
//! ```toml
//! [scenario]
//! builtin = "case2-bangbang"
//!
//! [grid]
//! radii = [4.0, 6.0, 8.0]
//! nodes_per_axis = 161      # on the first radius; larger radii keep the spacing
//! time_steps = 200
//! core_radius = 2.0
//!
//! [solver]
//! tol = 1e-5
//! max_iter = 100
//! epsilon_schedule = [0.5, 0.25, 0.125]
//!
//! [mc]
//! seed = 7
//! n_paths = 10000
//! deviations = ["u1=0", "u2=random(3;8)"]
//!
//! [outputs]
//! dir = "out"
//! ```

use hjbi_core::model::{builtin_source, ControlSet, SpecSource, Structure, DEFAULT_GRID_POINTS};
use hjbi_core::{builtin_scenario, Deviation, FeedbackMode, GameSpec, ModelError, Player, Strategy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad override '{0}': expected section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{0}")]
    Model(#[from] ModelError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

const SECTIONS: [&str; 5] = ["scenario", "grid", "solver", "mc", "outputs"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<RawScenario>,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    mc: Option<RawMc>,
    outputs: Option<RawOutputs>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    builtin: Option<String>,
    name: Option<String>,
    dim: Option<usize>,
    horizon: Option<f64>,
    structure: Option<String>,
    beta: Option<f64>,
    sigma: Option<Vec<String>>,
    drift: Option<Vec<String>>,
    h1: Option<String>,
    h2: Option<String>,
    g1: Option<String>,
    g2: Option<String>,
    u1: Option<Vec<f64>>,
    u2: Option<Vec<f64>>,
    u1_grid_points: Option<usize>,
    u2_grid_points: Option<usize>,
    u1_values: Option<Vec<f64>>,
    u2_values: Option<Vec<f64>>,
    feedback1: Option<String>,
    feedback2: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    radii: Option<Vec<f64>>,
    nodes_per_axis: Option<usize>,
    time_steps: Option<usize>,
    core_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<usize>,
    epsilon_schedule: Option<Vec<f64>>,
    feedback_mode: Option<String>,
    validation_samples: Option<usize>,
    gic_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    x0: Option<Vec<f64>>,
    n_paths: Option<usize>,
    n_steps: Option<usize>,
    seed: Option<u64>,
    deviations: Option<Vec<String>>,
    discretization_allowance: Option<f64>,
    exit_cap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<PathBuf>,
    dump_field: Option<bool>,
    report_format: Option<String>,
}

/// Effective configuration after overrides and defaults.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub mc: McConfig,
    pub outputs: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScenarioConfig {
    Builtin { builtin: String },
    Inline(Box<InlineScenario>),
}

/// A game written out in the coefficient DSL.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InlineScenario {
    pub name: String,
    pub dim: usize,
    pub horizon: f64,
    pub structure: String,
    pub beta: f64,
    /// Row-major `dim × dim` entries.
    pub sigma: Vec<String>,
    pub drift: Vec<String>,
    pub h1: String,
    pub h2: String,
    pub g1: String,
    pub g2: String,
    pub u1: ControlConfig,
    pub u2: ControlConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback2: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ControlConfig {
    Interval { interval: [f64; 2], grid_points: usize },
    Values { values: Vec<f64> },
}

impl ControlConfig {
    fn to_set(&self) -> Result<ControlSet, ModelError> {
        match self {
            ControlConfig::Interval { interval, grid_points } => {
                ControlSet::interval_with_grid(interval[0], interval[1], *grid_points)
            }
            ControlConfig::Values { values } => ControlSet::finite(values.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub radii: Vec<f64>,
    /// Nodes per axis on `radii[0]`; larger radii keep its spacing.
    pub nodes_per_axis: usize,
    pub time_steps: usize,
    pub core_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub epsilon_schedule: Vec<f64>,
    pub feedback_mode: String,
    pub validation_samples: usize,
    pub gic_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub deviations: Vec<String>,
    pub discretization_allowance: f64,
    pub exit_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    /// Where artifacts go; not part of the config hash.
    #[serde(skip)]
    pub dir: PathBuf,
    pub dump_field: bool,
    pub report_format: String,
}

/// Grid and solver defaults of a scenario.
struct Defaults {
    radii: Vec<f64>,
    nodes_per_axis: usize,
    time_steps: usize,
    core_radius: Option<f64>,
    epsilon_schedule: Vec<f64>,
}

fn defaults_for(builtin: Option<&str>) -> Defaults {
    let standard = |radii: Vec<f64>, core: Option<f64>, eps: Vec<f64>| Defaults {
        // h = 0.05 on the first radius
        nodes_per_axis: (40.0 * radii[0]).round() as usize + 1,
        radii,
        time_steps: 200,
        core_radius: core,
        epsilon_schedule: eps,
    };
    let schedule = vec![0.5, 0.25, 0.125];
    match builtin {
        Some("heat-oracle") => Defaults {
            radii: vec![std::f64::consts::FRAC_PI_2],
            nodes_per_axis: 201,
            time_steps: 1000,
            core_radius: None,
            epsilon_schedule: vec![],
        },
        Some("case1-continuous") => standard(vec![4.0], None, vec![]),
        Some("case2-bangbang") => standard(vec![4.0, 6.0, 8.0], Some(2.0), schedule),
        Some("case3-unbounded") => standard(vec![4.0, 6.0, 8.0], None, schedule),
        Some("linear-oracle") => standard(vec![2.0], None, vec![]),
        _ => Defaults {
            radii: vec![4.0],
            nodes_per_axis: 81,
            time_steps: 100,
            core_radius: None,
            epsilon_schedule: vec![],
        },
    }
}

/// Default deviation suite: both constant extremes plus one seeded random
/// staircase per player.
pub fn default_deviations(seed: u64) -> Vec<String> {
    vec![
        "u1=0".into(),
        "u1=1".into(),
        "u2=0".into(),
        "u2=1".into(),
        format!("u1=random({};8)", seed.wrapping_add(1)),
        format!("u2=random({};8)", seed.wrapping_add(2)),
    ]
}

/// Command-line adjustments applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// `section.key=value`; the value is read as a TOML value, else as a string.
    pub set: Vec<String>,
}

fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn section<'a>(table: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table, ConfigError> {
    let entry = table.entry(name).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    entry
        .as_table_mut()
        .ok_or_else(|| ConfigError::Invalid(format!("'{name}' must be a section")))
}

fn apply_overrides(table: &mut toml::Table, ov: &Overrides) -> Result<(), ConfigError> {
    for item in &ov.set {
        let (path, value) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.clone()))?;
        let (sec, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::Override(item.clone()))?;
        if !SECTIONS.contains(&sec) || key.is_empty() {
            return Err(ConfigError::Override(item.clone()));
        }
        section(table, sec)?.insert(key.to_string(), parse_value(value.trim()));
    }
    if let Some(name) = &ov.scenario {
        let mut t = toml::Table::new();
        t.insert("builtin".into(), toml::Value::String(name.clone()));
        table.insert("scenario".into(), toml::Value::Table(t));
    }
    if let Some(seed) = ov.seed {
        let seed = i64::try_from(seed).map_err(|_| ConfigError::Invalid("seed exceeds 2^63 - 1".into()))?;
        section(table, "mc")?.insert("seed".into(), toml::Value::Integer(seed));
    }
    if let Some(dir) = &ov.out_dir {
        section(table, "outputs")?.insert("dir".into(), toml::Value::String(dir.display().to_string()));
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies the overrides and fills in defaults.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?,
            None => String::new(),
        };
        RunConfig::from_toml(&text, ov)
    }

    pub fn from_toml(text: &str, ov: &Overrides) -> Result<RunConfig, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        apply_overrides(&mut table, ov)?;
        let raw: RawConfig = toml::Value::Table(table).try_into()?;
        resolve(raw)
    }

    /// Canonical TOML of the effective config (output directory excluded).
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn build_spec(&self) -> Result<GameSpec, ConfigError> {
        let spec = match &self.scenario {
            ScenarioConfig::Builtin { builtin } => builtin_scenario(builtin)?,
            ScenarioConfig::Inline(s) => s.source()?.build()?,
        };
        if self.mc.x0.len() != spec.dim {
            return invalid(format!("mc.x0 needs {} components", spec.dim));
        }
        Ok(spec)
    }

    pub fn scenario_name(&self) -> &str {
        match &self.scenario {
            ScenarioConfig::Builtin { builtin } => builtin,
            ScenarioConfig::Inline(s) => &s.name,
        }
    }

    pub fn feedback_mode(&self) -> Option<FeedbackMode> {
        match self.solver.feedback_mode.as_str() {
            "auto" => None,
            name => FeedbackMode::from_name(name),
        }
    }

    /// Parsed deviation suite, checked against the game's control sets.
    pub fn deviations(&self, spec: &GameSpec) -> Result<Vec<Deviation>, ConfigError> {
        self.mc
            .deviations
            .iter()
            .map(|d| {
                let dev = parse_deviation(d)?;
                let set = spec.control_set(dev.player);
                let values: &[f64] = match &dev.strategy {
                    Strategy::Constant(c) => std::slice::from_ref(c),
                    Strategy::Staircase(v) => v,
                    _ => &[],
                };
                if let Some(u) = values.iter().find(|u| !set.contains(**u)) {
                    return invalid(format!("deviation '{d}': {u} is outside the control set"));
                }
                Ok(dev)
            })
            .collect()
    }
}

impl InlineScenario {
    pub fn source(&self) -> Result<SpecSource, ConfigError> {
        let structure = Structure::from_name(&self.structure).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown structure '{}' (general, separated, affine-bang-bang, affine-unbounded)",
                self.structure
            ))
        })?;
        let feedback = match (&self.feedback1, &self.feedback2) {
            (Some(a), Some(b)) => Some([a.clone(), b.clone()]),
            (None, None) => None,
            _ => return invalid("feedback1 and feedback2 come together"),
        };
        Ok(SpecSource {
            name: self.name.clone(),
            dim: self.dim,
            horizon: self.horizon,
            sigma: self.sigma.clone(),
            drift: self.drift.clone(),
            running_payoff: [self.h1.clone(), self.h2.clone()],
            terminal_payoff: [self.g1.clone(), self.g2.clone()],
            controls: [self.u1.to_set()?, self.u2.to_set()?],
            structure,
            growth_exponent: self.beta,
            feedback,
        })
    }
}

/// `u1=0.5`, `u2=staircase(0;1;0.5)`, `u1=random(seed;pieces)` or `u2=feedback`.
/// Commas are accepted in place of semicolons.
pub fn parse_deviation(text: &str) -> Result<Deviation, ConfigError> {
    let bad = |why: &str| ConfigError::Invalid(format!("deviation '{text}': {why}"));
    let (who, what) = text.split_once('=').ok_or_else(|| bad("expected u1=... or u2=..."))?;
    let player = match who.trim() {
        "u1" => Player::One,
        "u2" => Player::Two,
        _ => return Err(bad("player must be u1 or u2")),
    };
    let what = what.trim();
    let args = |inner: &str| -> Vec<String> {
        inner.split([';', ',']).map(|s| s.trim().to_string()).collect()
    };
    let call = |name: &str| {
        what.strip_prefix(name)
            .and_then(|r| r.trim_start().strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
    };
    let strategy = if what == "feedback" {
        Strategy::Feedback
    } else if let Some(inner) = call("staircase") {
        let values = args(inner)
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("staircase values must be numbers"))?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(bad("staircase needs finite values"));
        }
        Strategy::Staircase(values)
    } else if let Some(inner) = call("random") {
        let a = args(inner);
        if a.len() != 2 {
            return Err(bad("random takes (seed;pieces)"));
        }
        let seed = a[0].parse().map_err(|_| bad("random seed must be an unsigned integer"))?;
        let pieces: usize = a[1].parse().map_err(|_| bad("pieces must be a positive integer"))?;
        if pieces == 0 {
            return Err(bad("pieces must be a positive integer"));
        }
        Strategy::RandomStaircase { seed, pieces }
    } else {
        match what.parse::<f64>() {
            Ok(c) if c.is_finite() => Strategy::Constant(c),
            _ => return Err(bad("expected a number, staircase(...), random(...) or feedback")),
        }
    };
    let id = format!("u{}={strategy}", player.number());
    Ok(Deviation { id, player, strategy })
}

fn control(
    who: &str,
    interval: Option<Vec<f64>>,
    grid_points: Option<usize>,
    values: Option<Vec<f64>>,
) -> Result<ControlConfig, ConfigError> {
    match (interval, values) {
        (Some(iv), None) => {
            if iv.len() != 2 {
                return invalid(format!("scenario.{who} must be [lower, upper]"));
            }
            Ok(ControlConfig::Interval {
                interval: [iv[0], iv[1]],
                grid_points: grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            })
        }
        (None, Some(values)) if grid_points.is_none() => Ok(ControlConfig::Values { values }),
        (None, None) => Ok(ControlConfig::Interval { interval: [0.0, 1.0], grid_points: grid_points.unwrap_or(DEFAULT_GRID_POINTS) }),
        _ => invalid(format!("scenario.{who}: give either an interval or {who}_values")),
    }
}

fn scenario(raw: Option<RawScenario>) -> Result<ScenarioConfig, ConfigError> {
    let raw = raw.unwrap_or_default();
    let RawScenario {
        builtin,
        name,
        dim,
        horizon,
        structure,
        beta,
        sigma,
        drift,
        h1,
        h2,
        g1,
        g2,
        u1,
        u2,
        u1_grid_points,
        u2_grid_points,
        u1_values,
        u2_values,
        feedback1,
        feedback2,
    } = raw;
    let any_inline = name.is_some() || dim.is_some() || drift.is_some() || sigma.is_some();
    match builtin {
        Some(b) if any_inline => invalid(format!("scenario.builtin = \"{b}\" cannot be mixed with inline fields")),
        Some(builtin) => {
            builtin_source(&builtin)?;
            Ok(ScenarioConfig::Builtin { builtin })
        }
        None if !any_inline => Ok(ScenarioConfig::Builtin { builtin: "heat-oracle".into() }),
        None => {
            let need = |v: Option<String>, key: &str| {
                v.ok_or_else(|| ConfigError::Invalid(format!("inline scenario needs scenario.{key}")))
            };
            let dim = dim.unwrap_or(1);
            Ok(ScenarioConfig::Inline(Box::new(InlineScenario {
                name: name.unwrap_or_else(|| "inline".into()),
                dim,
                horizon: horizon.unwrap_or(1.0),
                structure: structure.unwrap_or_else(|| "general".into()),
                beta: beta.unwrap_or(1.0),
                sigma: sigma.ok_or_else(|| ConfigError::Invalid("inline scenario needs scenario.sigma".into()))?,
                drift: drift.ok_or_else(|| ConfigError::Invalid("inline scenario needs scenario.drift".into()))?,
                h1: h1.unwrap_or_else(|| "0".into()),
                h2: h2.unwrap_or_else(|| "0".into()),
                g1: need(g1, "g1")?,
                g2: need(g2, "g2")?,
                u1: control("u1", u1, u1_grid_points, u1_values)?,
                u2: control("u2", u2, u2_grid_points, u2_values)?,
                feedback1,
                feedback2,
            })))
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be positive, got {v}"))
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mc_present = raw.mc.is_some();
    let scenario = scenario(raw.scenario)?;
    let (builtin, dim) = match &scenario {
        ScenarioConfig::Builtin { builtin } => (Some(builtin.as_str()), builtin_source(builtin)?.dim),
        ScenarioConfig::Inline(s) => (None, s.dim),
    };
    let d = defaults_for(builtin);

    let g = raw.grid.unwrap_or_default();
    let radii = g.radii.unwrap_or(d.radii);
    if radii.is_empty() {
        return invalid("grid.radii is empty");
    }
    for r in &radii {
        positive("grid.radii entries", *r)?;
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("grid.radii must be strictly increasing");
    }
    let nodes_per_axis = g.nodes_per_axis.unwrap_or(d.nodes_per_axis);
    if nodes_per_axis < 3 || nodes_per_axis.is_multiple_of(2) {
        return invalid("grid.nodes_per_axis must be odd and at least 3");
    }
    let time_steps = g.time_steps.unwrap_or(d.time_steps);
    if time_steps == 0 {
        return invalid("grid.time_steps must be positive");
    }
    let core_radius = g.core_radius.or(d.core_radius).unwrap_or(radii[0]);
    positive("grid.core_radius", core_radius)?;
    if core_radius > radii[0] {
        return invalid("grid.core_radius cannot exceed the first radius");
    }

    let s = raw.solver.unwrap_or_default();
    let solver = SolverConfig {
        tol: s.tol.unwrap_or(1e-5),
        max_iter: s.max_iter.unwrap_or(100),
        epsilon_schedule: s.epsilon_schedule.unwrap_or(d.epsilon_schedule),
        feedback_mode: s.feedback_mode.unwrap_or_else(|| "auto".into()),
        validation_samples: s.validation_samples.unwrap_or(1000),
        gic_samples: s.gic_samples.unwrap_or(10_000),
    };
    positive("solver.tol", solver.tol)?;
    if solver.max_iter == 0 || solver.validation_samples == 0 || solver.gic_samples == 0 {
        return invalid("solver.max_iter and sample counts must be positive");
    }
    if solver.epsilon_schedule.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return invalid("solver.epsilon_schedule entries must be >= 0");
    }
    if solver.feedback_mode != "auto" && FeedbackMode::from_name(&solver.feedback_mode).is_none() {
        return invalid(format!(
            "solver.feedback_mode '{}' is not one of auto, closed-form, separated-argmax, best-response",
            solver.feedback_mode
        ));
    }

    let m = raw.mc.unwrap_or_default();
    if mc_present && m.seed.is_none() {
        return invalid("the [mc] section needs a seed");
    }
    let seed = m.seed.unwrap_or(0);
    let mc = McConfig {
        x0: m.x0.unwrap_or_else(|| vec![0.0; dim]),
        n_paths: m.n_paths.unwrap_or(10_000),
        n_steps: m.n_steps.unwrap_or(time_steps),
        seed,
        deviations: m.deviations.unwrap_or_else(|| default_deviations(seed)),
        discretization_allowance: m.discretization_allowance.unwrap_or(0.02),
        exit_cap: m.exit_cap.unwrap_or(0.05),
    };
    if mc.n_paths == 0 || mc.n_steps == 0 {
        return invalid("mc.n_paths and mc.n_steps must be positive");
    }
    if mc.x0.len() != dim || mc.x0.iter().any(|v| !v.is_finite()) {
        return invalid(format!("mc.x0 needs {dim} finite components"));
    }
    if !(mc.discretization_allowance.is_finite() && mc.discretization_allowance >= 0.0) {
        return invalid("mc.discretization_allowance must be >= 0");
    }
    if !(0.0..=1.0).contains(&mc.exit_cap) {
        return invalid("mc.exit_cap must lie in [0, 1]");
    }
    for dev in &mc.deviations {
        parse_deviation(dev)?;
    }

    let o = raw.outputs.unwrap_or_default();
    let outputs = OutputConfig {
        dir: o.dir.unwrap_or_else(|| PathBuf::from("out")),
        dump_field: o.dump_field.unwrap_or(true),
        report_format: o.report_format.unwrap_or_else(|| "kv".into()),
    };
    if outputs.report_format != "kv" {
        return invalid(format!("outputs.report_format '{}' is not supported (kv)", outputs.report_format));
    }

    Ok(RunConfig {
        scenario,
        grid: GridConfig { radii, nodes_per_axis, time_steps, core_radius },
        solver,
        mc,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, set: &[&str]) -> Result<RunConfig, ConfigError> {
        let ov = Overrides { set: set.iter().map(|s| s.to_string()).collect(), ..Default::default() };
        RunConfig::from_toml(text, &ov)
    }

    #[test]
    fn scenario_defaults() {
        let c = load("[scenario]\nbuiltin = \"case2-bangbang\"", &[]).unwrap();
        assert_eq!(c.grid.radii, [4.0, 6.0, 8.0]);
        assert_eq!(c.grid.nodes_per_axis, 161);
        assert_eq!(c.grid.core_radius, 2.0);
        assert_eq!(c.solver.epsilon_schedule, [0.5, 0.25, 0.125]);
        assert_eq!(c.mc.n_steps, 200);
        assert_eq!(c.mc.deviations.len(), 6);
        let heat = load("", &[]).unwrap();
        assert_eq!(heat.scenario_name(), "heat-oracle");
        assert_eq!((heat.grid.nodes_per_axis, heat.grid.time_steps), (201, 1000));
    }

    #[test]
    fn overrides_win_and_change_the_hash() {
        let base = load("[scenario]\nbuiltin = \"case1-continuous\"", &[]).unwrap();
        let c = load(
            "[scenario]\nbuiltin = \"case1-continuous\"",
            &["mc.seed=1", "mc.n_paths=500", "grid.radii=[3, 5]", "solver.feedback_mode=best-response"],
        )
        .unwrap();
        assert_eq!(c.mc.n_paths, 500);
        assert_eq!(c.grid.radii, [3.0, 5.0]);
        assert_eq!(c.solver.feedback_mode, "best-response");
        assert_ne!(base.hash(), c.hash());
        assert_eq!(base.hash(), load("[scenario]\nbuiltin = \"case1-continuous\"", &[]).unwrap().hash());
    }

    #[test]
    fn output_dir_is_not_hashed() {
        let a = load("", &["outputs.dir=a"]).unwrap();
        let b = load("", &["outputs.dir=b"]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.outputs.dir, b.outputs.dir);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for (text, set) in [
            ("[grid]\nradii = [4.0, 3.0]", vec![]),
            ("[grid]\nnodes_per_axis = 10", vec![]),
            ("[mc]\nn_paths = 10", vec![]),
            ("[solver]\ntol = -1.0", vec![]),
            ("[scenario]\nbuiltin = \"case9\"", vec![]),
            ("[grid]\nradius = 3.0", vec![]),
            ("", vec!["mc.seed=1", "mc.x0=[1, 2]"]),
            ("", vec!["nosuch.key=1"]),
            ("", vec!["mc.seed=1", "mc.deviations=[\"u3=0\"]"]),
        ] {
            assert!(load(text, &set).is_err(), "{text} {set:?}");
        }
        let err = load("[grid]\nradii = [4.0,\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn inline_scenario_builds() {
        let text = r#"
[scenario]
name = "drifting"
dim = 1
structure = "affine-bang-bang"
sigma = ["1"]
drift = ["u1 - u2"]
h1 = "-0.1*u1"
h2 = "-0.1*u2"
g1 = "exp(-x1^2)"
g2 = "exp(-(x1 - 1)^2)"
u1 = [0.0, 1.0]
u2 = [0.0, 1.0]
"#;
        let c = load(text, &[]).unwrap();
        let spec = c.build_spec().unwrap();
        assert_eq!(spec.name, "drifting");
        assert_eq!(spec.structure, Structure::AffineBangBang);
        assert!(c.canonical().contains("drift = [\"u1 - u2\"]"));
        let bad = text.replace("u1 - u2", "u1 - ");
        assert!(load(&bad, &[]).unwrap().build_spec().is_err());
    }

    #[test]
    fn deviation_strings() {
        let d = parse_deviation("u2=random(7,8)").unwrap();
        assert_eq!(d.player, Player::Two);
        assert_eq!(d.strategy, Strategy::RandomStaircase { seed: 7, pieces: 8 });
        assert_eq!(d.id, "u2=random(7;8)");
        assert_eq!(parse_deviation("u1 = 0.5").unwrap().strategy, Strategy::Constant(0.5));
        assert_eq!(
            parse_deviation("u1=staircase(0;1)").unwrap().strategy,
            Strategy::Staircase(vec![0.0, 1.0])
        );
        assert_eq!(parse_deviation("u1=feedback").unwrap().strategy, Strategy::Feedback);
        for bad in ["u1", "x=0", "u1=random(1)", "u1=abc", "u1=staircase()", "u1=random(1;0)"] {
            assert!(parse_deviation(bad).is_err(), "{bad}");
        }
        let c = load("[scenario]\nbuiltin = \"case2-bangbang\"", &["mc.seed=1", "mc.deviations=[\"u1=2\"]"]).unwrap();
        assert!(c.deviations(&c.build_spec().unwrap()).is_err());
    }
}
