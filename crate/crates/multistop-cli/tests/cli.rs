//! End-to-end tests of the `multistop` binary: exit codes, stderr error
//! lines, CSV shapes, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn multistop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multistop"))
}

/// A small, fast variant of the shipped worked example.
const SMALL: &str = "\
[model]
drift          = 0.36
sigma          = 0.2
down_jump_rate = 1.0
down_mix       = 1.0:1.0
up_jump_rate   = 0.0

[contract]
strike      = 50.0
alpha       = -0.02
n_exercises = 2

[refraction]
shape = 1
mean  = 1.0

[mc]
n_paths = 2500
h       = 0.002
seed    = 11

[output]
grid_points = 41

[sweep]
delta_bars = 0.5, 1.0, 2.0
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    multistop().args(args).output().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn validate_passes_on_the_shipped_configs() {
    for config in ["base.conf", "erlang2.conf", "two_sided.conf"] {
        let path = format!("{}/../../configs/{config}", env!("CARGO_MANIFEST_DIR"));
        let out = run(&["validate", "--config", &path]);
        assert_eq!(out.status.code(), Some(0), "{config}: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.lines().count() >= 5, "{config}: {text}");
        assert!(text.lines().all(|l| l.starts_with("PASS")), "{config}: {text}");
    }
}

#[test]
fn validate_fails_with_exit_2_when_assumptions_break() {
    let dir = tempfile::tempdir().unwrap();
    // α = −0.2 < ψ(1) = −0.12: discounted payoffs grow without bound.
    let config = write_config(dir.path(), &SMALL.replace("-0.02", "-0.2"));
    let out = run(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn solve_writes_csvs_and_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("run");
    let out = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("k=1 x_star="));

    let thresholds = std::fs::read_to_string(out_dir.join("thresholds.csv")).unwrap();
    let lines: Vec<&str> = thresholds.lines().collect();
    assert_eq!(lines[0], "k,x_star_log,s_star_price");
    assert_eq!(lines.len(), 3, "header plus one row per exercise right");
    let log_strike = 50.0_f64.ln();
    let mut previous = f64::INFINITY;
    for (i, row) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], (i + 1).to_string());
        let x: f64 = fields[1].parse().unwrap();
        let s: f64 = fields[2].parse().unwrap();
        assert!(x > log_strike && x <= previous, "thresholds must decrease");
        assert!((s - x.exp()).abs() < 1e-12 * s, "price column is e^x");
        previous = x;
    }

    let values = std::fs::read_to_string(out_dir.join("values.csv")).unwrap();
    let lines: Vec<&str> = values.lines().collect();
    assert_eq!(lines[0], "x,v1,v2,payoff");
    assert_eq!(lines.len(), 42, "header plus one row per grid point");
    for row in &lines[1..] {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 4);
        let (v1, v2, payoff) = (fields[1], fields[2], fields[3]);
        assert!(v2 > v1, "two rights are worth more than one");
        assert!(v1 >= payoff - 1e-9, "value dominates the payoff");
    }
}

#[test]
fn solve_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (dir_a, dir_b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&dir_a, &dir_b] {
        let out = run(&[
            "solve",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["thresholds.csv", "values.csv"] {
        assert_eq!(
            std::fs::read(dir_a.join(name)).unwrap(),
            std::fs::read(dir_b.join(name)).unwrap(),
            "{name} must be bit-stable"
        );
    }
}

#[test]
fn sweep_writes_rows_for_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "delta_bar,k,x_star");
    assert_eq!(lines.len(), 1 + 3 * 2, "3 refraction means x 2 rights");
    // x₁⋆ never depends on the refraction time.
    let x1: Vec<&str> = lines[1..]
        .iter()
        .filter(|l| l.split(',').nth(1) == Some("1"))
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(x1.len(), 3);
    assert!(x1.windows(2).all(|w| {
        let (a, b): (f64, f64) = (w[0].parse().unwrap(), w[1].parse().unwrap());
        (a - b).abs() < 1e-10
    }));
}

#[test]
fn check_report_is_deterministic_and_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (dir_a, dir_b) = (dir.path().join("a"), dir.path().join("b"));
    let mut reports = Vec::new();
    for out_dir in [&dir_a, &dir_b] {
        let out = run(&[
            "check",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--paths",
            "2000",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}\n{}", stdout(&out), stderr(&out));
        let report = std::fs::read_to_string(out_dir.join("check_report.txt")).unwrap();
        assert_eq!(report, stdout(&out), "report file must mirror stdout");
        reports.push(report);
    }
    assert_eq!(reports[0], reports[1], "seeded reruns must be identical");
    assert!(reports[0].contains("PASS mc-passage"));
    assert!(reports[0].contains("PASS mc-determinism"));
    assert!(reports[0].contains(" 0 failed"));
}

#[test]
fn seed_override_changes_the_monte_carlo_lines_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run_with_seed = |seed: &str, out_dir: &Path| {
        let out = run(&[
            "check",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--paths",
            "2000",
            "--seed",
            seed,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        stdout(&out)
    };
    let a = run_with_seed("1", &dir.path().join("a"));
    let b = run_with_seed("2", &dir.path().join("b"));
    assert_ne!(a, b, "different seeds must move the MC estimates");
    let analytic = |text: &str| -> Vec<String> {
        text.lines().filter(|l| !l.contains("mc-")).map(str::to_string).collect()
    };
    assert_eq!(analytic(&a), analytic(&b), "analytic lines are seed-independent");
}

#[test]
fn config_parse_errors_exit_4_with_line_context() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL}typo = 1\n"));
    let out = run(&["solve", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = stderr(&out);
    assert!(err.starts_with("error[config]:"), "{err}");
    assert!(err.contains("unknown key `typo`"), "{err}");
    assert!(err.contains("line 27"), "{err}");
}

#[test]
fn solve_on_invalid_assumptions_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("-0.02", "-0.2"));
    let out = run(&["solve", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[validation]:"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&["solve", "--config", "/nonexistent/run.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[io]:"), "{}", stderr(&out));
}

#[test]
fn help_lists_the_subcommands() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for sub in ["validate", "solve", "sweep", "check"] {
        assert!(text.contains(sub), "{text}");
    }
}
