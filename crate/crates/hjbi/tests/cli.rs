use std::path::Path;
use std::process::{Command, Output};

fn hjbi(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjbi"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small case2 run: coarse grid, few paths.
const SMALL: [&str; 10] = [
    "--scenario",
    "case2-bangbang",
    "--seed",
    "7",
    "--set",
    "grid.radii=[4.0]",
    "--set",
    "mc.n_paths=1000",
    "--set",
    "grid.nodes_per_axis=81",
];

fn small(cmd: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![cmd.to_string()];
    v.extend(SMALL.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_small(cmd: &str, extra: &[&str], out: &Path) -> Output {
    let args = small(cmd, extra);
    hjbi(&args.iter().map(String::as_str).collect::<Vec<_>>(), out)
}

#[test]
fn heat_solve_writes_field_with_oracle_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjbi(&["solve", "--scenario", "heat-oracle", "--quiet"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("1.0,0.0,")).expect("row at s=1, x=0");
    let v: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((v - 0.367879).abs() <= 1e-3, "{v}");
    let report = std::fs::read_to_string(dir.path().join("solve_report.txt")).unwrap();
    assert!(report.starts_with("# hjbi "));
    assert!(report.contains("# config_sha256 = "));
    assert!(report.contains("verdict.converged = true"));
}

#[test]
fn deviate_is_byte_identical_across_runs_and_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run_small("deviate", &["--quiet", "--workers", "1"], a.path());
    let ob = run_small("deviate", &["--quiet", "--workers", "3"], b.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(ob.status.success(), "{}", stderr(&ob));
    for name in ["nash_deviations.csv", "nash_report.txt", "field.csv", "solve_report.txt"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    let csv = std::fs::read_to_string(a.path().join("nash_deviations.csv")).unwrap();
    assert!(csv.starts_with("deviation_id,player,mean,stderr,gap,gap_stderr,verdict\n"));
    assert_eq!(csv.lines().count(), 7);
    assert!(!csv.contains('\r'));
}

#[test]
fn verify_with_corrupted_field_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small("solve", &["--quiet"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = dir.path().join("field.csv");

    let good = run_small("verify", &["--quiet", "--field", field.to_str().unwrap()], dir.path());
    assert!(good.status.success(), "{}", stderr(&good));

    let text = std::fs::read_to_string(&field).unwrap();
    let mut lines = text.lines();
    let mut bad = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let mut f: Vec<String> = line.split(',').map(String::from).collect();
        f[2] = format!("{:?}", f[2].parse::<f64>().unwrap() + 0.5);
        bad.push_str(&f.join(","));
        bad.push('\n');
    }
    let bad_path = dir.path().join("bad.csv");
    std::fs::write(&bad_path, bad).unwrap();
    let o = run_small("verify", &["--quiet", "--field", bad_path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("value mismatch for player 1"), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert!(report.contains("verdict.value_match = false"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nradii = [4.0, 3.0]\n").unwrap();
    let o = hjbi(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radii"), "{}", stderr(&o));

    std::fs::write(&cfg, "[grid\n").unwrap();
    let o = hjbi(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = hjbi(&["solve", "--scenario", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hjbi(&["solve", "--set", "mc.n_paths=10"], dir.path());
    assert_eq!(o.status.code(), Some(2), "mc section without a seed");
    let o = hjbi(&["verify", "--scenario", "heat-oracle", "--field", "/nonexistent.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1, "no artifacts on config errors");
}

#[test]
fn inline_config_runs_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("game.toml");
    std::fs::write(
        &cfg,
        r#"
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

[mc]
seed = 3
"#,
    )
    .unwrap();
    let o = hjbi(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("verdict.assumptions = true"), "{out}");
    let report = std::fs::read_to_string(dir.path().join("validation.txt")).unwrap();
    assert!(report.contains("#   drift = [\"u1 - u2\"]"), "{report}");
}

#[test]
fn scenarios_lists_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjbi(&["scenarios"], dir.path());
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    for name in ["heat-oracle", "linear-oracle", "case1-continuous", "case2-bangbang", "case3-unbounded"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn export_round_trips_and_slices() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small("solve", &["--quiet"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let field = dir.path().join("field.csv");
    let f = field.to_str().unwrap();
    let o = run_small("export", &["--quiet", "--field", f], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&field).unwrap(), std::fs::read(dir.path().join("field_export.csv")).unwrap());

    let slice = dir.path().join("slice.csv");
    let o = run_small("export", &["--quiet", "--field", f, "--s", "1.0", "--output", slice.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&slice).unwrap();
    assert_eq!(text.lines().count(), 82);
    assert!(text.lines().skip(1).all(|l| l.starts_with("1.0,")));

    let o = run_small("export", &["--quiet", "--field", f, "--s", "0.123"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
