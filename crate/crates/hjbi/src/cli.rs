//! `hjbi` subcommands. Every command returns an exit status:
//! 0 all verdicts true, 1 I/O failure, 2 config or input error,
//! 3 solve or simulation error, 4 a verdict is false.

use crate::config::{ConfigError, Overrides, RunConfig};
use crate::fieldio::{read_field_csv, write_field_csv, FieldError};
use crate::report::{write_atomic, Report};
use clap::{Parser, Subcommand};
use hjbi_core::model::BUILTIN_SCENARIOS;
use hjbi_core::{
    check_gic, deviation_test, expanding_domain_solve, girsanov_consistency,
    simulate_paths, validate_spec, value_match_from_batch, ControlSource, FeedbackResolver,
    GameSpec, GicSampling, Grid, McOptions, PicardOptions, Player, SimulationMode, ValueField,
};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Slack allowed on the discrete maximum principle.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-10;
/// Largest relative spread of the growth constant across radii.
pub const GROWTH_VARIATION_LIMIT: f64 = 0.2;
/// Stored gradients further than this from the recomputed ones draw a warning.
const STALE_GRADIENT_WARN: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "hjbi", version, about = "Solve and verify two-player stochastic differential games")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Built-in scenario; replaces the config's [scenario] section.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set mc.n_paths=100000`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Monte-Carlo seed; replaces mc.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the game's assumptions and the generalized Isaacs condition.
    Validate,
    /// Solve the HJBI system on the expanding domains.
    Solve,
    /// Value match and Girsanov consistency against Monte-Carlo.
    Verify {
        /// Use a stored field instead of solving.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Nash deviation tests.
    Deviate {
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Re-emit a stored field, optionally one time level only.
    Export {
        #[arg(long)]
        field: PathBuf,
        /// Inverted time `s = T − t` of the level to keep.
        #[arg(long)]
        s: Option<f64>,
        /// Output path (default: <out-dir>/field_export.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solve(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    fn code(&self) -> i32 {
        match self {
            RunError::Io { .. } => 1,
            RunError::Config(_) | RunError::Field(_) | RunError::Input(_) => 2,
            RunError::Solve(_) => 3,
        }
    }
}

fn solve_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solve(e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(reports) => {
            let failed: Vec<&str> = reports.iter().flat_map(|r| r.failed()).collect();
            if failed.is_empty() {
                0
            } else {
                eprintln!("verification failed: {}", failed.join(", "));
                4
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: RunConfig,
    spec: GameSpec,
    resolver: FeedbackResolver,
}

impl Ctx<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.outputs.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, RunError> {
        let path = self.out(name);
        write_atomic(&path, bytes).map_err(|source| RunError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    fn write_report(&self, name: &str, command: &str, report: &Report) -> Result<(), RunError> {
        let path = self.write(name, report.render(command, &self.cfg).as_bytes())?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn mc_options(&self) -> McOptions {
        let mc = &self.cfg.mc;
        McOptions {
            n_paths: mc.n_paths,
            n_steps: mc.n_steps,
            seed: mc.seed,
            mode: SimulationMode::ControlledDynamics,
            record_paths: false,
            exit_cap: mc.exit_cap,
            discretization_allowance: mc.discretization_allowance,
        }
    }

    fn timed<T>(&self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.say(format!("phase {phase}: {:.2} s", t0.elapsed().as_secs_f64()));
        out
    }
}

fn dispatch(cli: &Cli) -> Result<Vec<Report>, RunError> {
    if let Command::Scenarios = cli.command {
        for (name, about) in BUILTIN_SCENARIOS {
            println!("{name:<18} {about}");
        }
        return Ok(vec![]);
    }
    let ov = Overrides {
        scenario: cli.scenario.clone(),
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        set: cli.set.clone(),
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
    let spec = cfg.build_spec()?;
    let resolver = match cfg.feedback_mode() {
        Some(mode) => FeedbackResolver::new(&spec, mode).map_err(|e| RunError::Input(e.to_string()))?,
        None => FeedbackResolver::default_for(&spec),
    };
    let ctx = Ctx { cli, cfg, spec, resolver };
    ctx.say(format!("scenario {} ({}), config {}", ctx.cfg.scenario_name(), ctx.spec.structure, &ctx.cfg.hash()[..16]));

    match &cli.command {
        Command::Scenarios => unreachable!("handled above"),
        Command::Validate => {
            let report = ctx.timed("validate", || validation(&ctx))?;
            ctx.write_report("validation.txt", "validate", &report)?;
            if !cli.quiet {
                print!("{}", report.body());
            }
            Ok(vec![report])
        }
        Command::Solve => {
            let (_, report) = solve(&ctx)?;
            Ok(vec![report])
        }
        Command::Verify { field } => {
            let (field, mut reports) = obtain_field(&ctx, field.as_deref())?;
            let report = ctx.timed("verify", || verify(&ctx, &field))?;
            ctx.write_report("verify_report.txt", "verify", &report)?;
            reports.push(report);
            Ok(reports)
        }
        Command::Deviate { field } => {
            let (field, mut reports) = obtain_field(&ctx, field.as_deref())?;
            let report = ctx.timed("deviate", || deviate(&ctx, &field))?;
            ctx.write_report("nash_report.txt", "deviate", &report)?;
            reports.push(report);
            Ok(reports)
        }
        Command::Export { field, s, output } => {
            export(&ctx, field, *s, output.as_deref())?;
            Ok(vec![])
        }
    }
}

fn validation(ctx: &Ctx) -> Result<Report, RunError> {
    let (spec, cfg) = (&ctx.spec, &ctx.cfg);
    let mut r = Report::new();
    r.text("scenario", cfg.scenario_name()).text("structure", spec.structure);
    match validate_spec(spec, cfg.solver.validation_samples, cfg.mc.seed) {
        Ok(v) => {
            r.text("validation.samples", v.samples_used)
                .num("validation.ellipticity_lower", v.ellipticity_lower)
                .num("validation.ellipticity_upper", v.ellipticity_upper)
                .text("validation.ellipticity_ok", v.ellipticity_ok)
                .num("validation.sup_drift", v.sup_drift)
                .list("validation.sup_running", &v.sup_running)
                .list("validation.sup_terminal", &v.sup_terminal)
                .text("validation.boundedness_ok", v.boundedness_ok)
                .num("validation.drift_growth_constant", v.drift_growth_constant)
                .num("validation.payoff_growth_constant", v.payoff_growth_constant)
                .text("validation.growth_ok", v.growth_ok)
                .num("validation.structure_defect", v.structure_defect)
                .text("validation.structure_ok", v.structure_ok);
            if !v.structure_note.is_empty() {
                r.text("validation.structure_note", &v.structure_note);
            }
            r.verdict("assumptions", v.passed(spec.structure));
        }
        Err(e) => {
            r.text("validation.error", e);
            r.verdict("assumptions", false);
            return Ok(r);
        }
    }
    let gic = check_gic(&ctx.resolver, spec, cfg.solver.gic_samples, cfg.mc.seed, GicSampling::default())
        .map_err(solve_err)?;
    r.text("gic.feedback_mode", ctx.resolver.mode.name())
        .text("gic.samples", gic.samples)
        .num("gic.worst_violation_1", gic.worst_violation_1)
        .num("gic.worst_violation_2", gic.worst_violation_2)
        .text("gic.violating_points", gic.violating_points.len())
        .verdict("gic", gic.certified());
    Ok(r)
}

fn solve(ctx: &Ctx) -> Result<(ValueField, Report), RunError> {
    let (spec, cfg) = (&ctx.spec, &ctx.cfg);
    let mut report = ctx.timed("validate", || validation(ctx))?;
    if report.get("validation.error").is_some() {
        ctx.write_report("solve_report.txt", "solve", &report)?;
        return Err(RunError::Input(format!(
            "game fails validation: {}",
            report.get("validation.error").unwrap_or_default()
        )));
    }
    let g = &cfg.grid;
    let base = Grid::new(spec.dim, g.radii[0], g.nodes_per_axis, g.time_steps, spec.horizon).map_err(solve_err)?;
    let opts = PicardOptions {
        tolerance: cfg.solver.tol,
        max_iterations: cfg.solver.max_iter,
        epsilon_schedule: cfg.solver.epsilon_schedule.clone(),
    };
    let (field, st) = ctx.timed("solve", || {
        expanding_domain_solve(spec, &base, &g.radii, Some(g.core_radius), &ctx.resolver, &opts)
    })
    .map_err(solve_err)?;

    let r = &mut report;
    r.text("feedback_mode", ctx.resolver.mode.name())
        .num("spacing", base.spacing())
        .text("time_steps", g.time_steps)
        .num("horizon", spec.horizon)
        .list("radii", &st.radii)
        .num("core_radius", st.core_radius);
    for (j, d) in st.diagnostics.iter().enumerate() {
        let key = |k: &str| format!("r{j}.{k}");
        let stage = d.final_stage();
        r.num(key("radius"), st.radii[j])
            .text(key("iterations_used"), d.iterations_used)
            .text(key("converged"), d.converged)
            .list(key("epsilon_schedule"), &d.epsilon_schedule())
            .list(key("picard_value_changes"), &stage.value_changes)
            .list(key("picard_gradient_changes"), &stage.gradient_changes)
            .text(key("picard_tail_decreasing"), d.tail_is_decreasing(5));
        match d.max_principle_margin {
            Some(m) => r.num(key("max_principle_margin"), m),
            None => r.text(key("max_principle_margin"), "n/a"),
        };
        r.num(key("growth_constant"), d.growth_constant)
            .list(key("residual_sup"), &d.residual.sup)
            .list(key("residual_mean_abs"), &d.residual.mean_abs)
            .text(key("residual_evaluated"), format!("{};{}", d.residual.evaluated[0], d.residual.evaluated[1]))
            .text(key("residual_in_band"), format!("{};{}", d.residual.in_band[0], d.residual.in_band[1]))
            .list(key("residual_band"), &d.residual.band);
    }
    r.list("core_differences", &st.core_differences)
        .num("growth_variation", st.growth_variation());
    for p in Player::BOTH {
        let v = field.sample(p, spec.horizon, &cfg.mc.x0).value;
        r.num(format!("value_at_x0.V{}", p.number()), v);
    }
    r.verdict("converged", st.all_converged());
    if spec.structure.has_bounded_data() {
        let ok = st
            .diagnostics
            .iter()
            .all(|d| d.max_principle_margin.is_some_and(|m| m >= -MAX_PRINCIPLE_SLACK));
        r.verdict("max_principle", ok);
        if st.core_differences.len() >= 2 {
            r.verdict("domain_stability", st.differences_decreasing());
        }
    } else if st.radii.len() >= 2 {
        r.verdict("growth_bound", st.growth_variation() < GROWTH_VARIATION_LIMIT);
    }

    if cfg.outputs.dump_field {
        let bytes = ctx.timed("write field", || write_field_csv(&field));
        let path = ctx.write("field.csv", &bytes)?;
        ctx.say(format!("wrote {}", path.display()));
    }
    ctx.write_report("solve_report.txt", "solve", &report)?;
    for (name, ok) in report.verdicts() {
        ctx.say(format!("  {name}: {}", if ok { "pass" } else { "FAIL" }));
    }
    Ok((field, report))
}

/// A stored field if given, otherwise a fresh solve (whose artifacts are written too).
fn obtain_field(ctx: &Ctx, path: Option<&Path>) -> Result<(ValueField, Vec<Report>), RunError> {
    let Some(path) = path else {
        let (field, report) = solve(ctx)?;
        return Ok((field, vec![report]));
    };
    let bytes = std::fs::read(path).map_err(|e| RunError::Input(format!("cannot read {}: {e}", path.display())))?;
    let loaded = read_field_csv(&bytes)?;
    let grid = loaded.field.grid();
    if grid.dim != ctx.spec.dim || (grid.horizon - ctx.spec.horizon).abs() > 1e-12 * ctx.spec.horizon {
        return Err(RunError::Input(format!(
            "field in {} (N={}, T={}) does not match the game (N={}, T={})",
            path.display(),
            grid.dim,
            grid.horizon,
            ctx.spec.dim,
            ctx.spec.horizon
        )));
    }
    if loaded.stale_gradient > STALE_GRADIENT_WARN {
        eprintln!(
            "warning: stored gradients differ from the values' finite differences by up to {:e}; using recomputed gradients",
            loaded.stale_gradient
        );
    }
    Ok((loaded.field, vec![]))
}

fn field_note(r: &mut Report, field: &ValueField) {
    let g = field.grid();
    r.num("field.radius", g.radius).text("field.nodes_per_axis", g.nodes_per_axis).text("field.time_steps", g.time_steps);
}

fn verify(ctx: &Ctx, field: &ValueField) -> Result<Report, RunError> {
    let (spec, cfg) = (&ctx.spec, &ctx.cfg);
    let opts = ctx.mc_options();
    let mut r = Report::new();
    r.text("scenario", cfg.scenario_name());
    field_note(&mut r, field);
    r.list("x0", &cfg.mc.x0).text("n_paths", opts.n_paths).text("n_steps", opts.n_steps).text("seed", opts.seed);
    let batch = simulate_paths(spec, &cfg.mc.x0, &opts, &ControlSource::feedback(field, &ctx.resolver))
        .map_err(solve_err)?;
    let vm = value_match_from_batch(field, &batch, opts.discretization_allowance);
    r.num("allowance", opts.discretization_allowance).num("exit_fraction", batch.exit_fraction());
    for m in &vm {
        let key = |k: &str| format!("value_match.V{}.{k}", m.player.number());
        r.num(key("pde"), m.pde_value)
            .num(key("mc_mean"), m.mc_mean)
            .num(key("mc_stderr"), m.mc_stderr)
            .num(key("difference"), m.difference)
            .num(key("tolerance"), m.tolerance)
            .text(key("pass"), m.pass);
        if !m.pass {
            eprintln!(
                "value mismatch for player {}: PDE {} vs MC {} ± {} (|diff| {} > tolerance {})",
                m.player.number(),
                m.pde_value,
                m.mc_mean,
                m.mc_stderr,
                m.difference,
                m.tolerance
            );
        }
    }
    let g = girsanov_consistency(spec, field, &ctx.resolver, &cfg.mc.x0, &opts).map_err(solve_err)?;
    for i in 0..2 {
        let key = |k: &str| format!("girsanov.J{}.{k}", i + 1);
        r.num(key("weighted_mean"), g.girsanov[i].mean)
            .num(key("weighted_stderr"), g.girsanov[i].stderr)
            .num(key("controlled_mean"), g.controlled[i].mean)
            .num(key("controlled_stderr"), g.controlled[i].stderr)
            .num(key("combined_stderr"), g.combined_stderr[i])
            .text(key("agree"), g.agree[i]);
    }
    r.num("girsanov.weight_mean", g.weight_mean).num("girsanov.weight_stderr", g.weight_stderr);
    warnings(ctx, &mut r, &batch.warnings);
    r.verdict("value_match", vm.iter().all(|m| m.pass))
        .verdict("girsanov_agreement", g.agree.iter().all(|a| *a))
        .verdict("weight_martingale", g.weight_ok);
    Ok(r)
}

fn warnings(ctx: &Ctx, r: &mut Report, list: &[String]) {
    for (k, w) in list.iter().enumerate() {
        r.text(format!("warning.{k}"), w);
        if !ctx.cli.quiet {
            eprintln!("warning: {w}");
        }
    }
}

fn deviate(ctx: &Ctx, field: &ValueField) -> Result<Report, RunError> {
    let (spec, cfg) = (&ctx.spec, &ctx.cfg);
    let opts = ctx.mc_options();
    let devs = cfg.deviations(spec)?;
    let nash = deviation_test(spec, field, &ctx.resolver, &cfg.mc.x0, &devs, &opts).map_err(solve_err)?;

    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fmt = crate::fieldio::fmt_f64;
    let io = |e: csv::Error| RunError::Io { path: ctx.out("nash_deviations.csv"), source: e.into() };
    csv.write_record(["deviation_id", "player", "mean", "stderr", "gap", "gap_stderr", "verdict"]).map_err(io)?;
    for d in &nash.deviations {
        csv.write_record([
            d.id.clone(),
            d.player.number().to_string(),
            fmt(d.estimate.mean),
            fmt(d.estimate.stderr),
            fmt(d.gap),
            fmt(d.gap_stderr),
            d.verdict.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = csv.into_inner().map_err(|e| RunError::Solve(e.to_string()))?;
    let path = ctx.write("nash_deviations.csv", &bytes)?;
    ctx.say(format!("wrote {}", path.display()));

    let mut r = Report::new();
    r.text("scenario", cfg.scenario_name());
    field_note(&mut r, field);
    r.list("x0", &cfg.mc.x0)
        .text("n_paths", opts.n_paths)
        .text("n_steps", opts.n_steps)
        .text("seed", opts.seed)
        .num("allowance", nash.allowance)
        .num("exit_fraction", nash.exit_fraction);
    for e in &nash.equilibrium {
        r.num(format!("equilibrium.J{}.mean", e.player.number()), e.mean)
            .num(format!("equilibrium.J{}.stderr", e.player.number()), e.stderr);
    }
    for d in &nash.deviations {
        r.num(format!("deviation.{}.gap", d.id), d.gap)
            .num(format!("deviation.{}.gap_stderr", d.id), d.gap_stderr)
            .text(format!("deviation.{}.verdict", d.id), d.verdict);
        ctx.say(format!(
            "  {:<22} gap {:+.4} ± {:.4}  {}",
            d.id,
            d.gap,
            d.gap_stderr,
            if d.verdict { "pass" } else { "FAIL" }
        ));
    }
    for m in &nash.value_match {
        let key = |k: &str| format!("value_match.V{}.{k}", m.player.number());
        r.num(key("pde"), m.pde_value).num(key("difference"), m.difference).num(key("tolerance"), m.tolerance);
    }
    warnings(ctx, &mut r, &nash.warnings);
    r.verdict("nash_deviations", nash.deviations_pass()).verdict("value_match", nash.value_match_pass());
    Ok(r)
}

fn export(ctx: &Ctx, path: &Path, s: Option<f64>, output: Option<&Path>) -> Result<(), RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::Input(format!("cannot read {}: {e}", path.display())))?;
    let field = read_field_csv(&bytes)?.field;
    let mut out = write_field_csv(&field);
    if let Some(s) = s {
        let g = *field.grid();
        let k = (0..g.levels())
            .find(|k| (g.s(*k) - s).abs() <= 1e-9 * (1.0 + g.horizon))
            .ok_or_else(|| RunError::Input(format!("s = {s} is not a time level (dt = {})", g.dt())))?;
        let text = String::from_utf8(out).expect("ascii csv");
        let mut lines = text.lines();
        let mut kept = String::new();
        kept.push_str(lines.next().unwrap_or_default());
        kept.push('\n');
        for line in lines.skip(k * g.n_nodes()).take(g.n_nodes()) {
            kept.push_str(line);
            kept.push('\n');
        }
        out = kept.into_bytes();
    }
    let target = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.out("field_export.csv"));
    write_atomic(&target, &out).map_err(|source| RunError::Io { path: target.clone(), source })?;
    ctx.say(format!("wrote {}", target.display()));
    Ok(())
}
