//! The four subcommands: `validate`, `solve`, `sweep`, `check`.
//!
//! Each command maps a parsed [`RunConfig`] plus an output directory to a
//! [`CmdOutcome`]: the text for stdout and the process exit code. File
//! writes happen here; printing and exiting happen in `main`.
//!
//! Everything a command emits — CSV files, the check report, the stdout
//! text — is deterministic for a fixed config and seed: no timestamps, no
//! hash-ordered iteration, numbers always serialized through [`fmt_e`]
//! (17 significant digits, enough to round-trip an `f64` exactly).

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use multistop_core::{
    build_factor, discounted_passage_transform, first_passage_transform, kolmogorov_smirnov,
    resolvent_cdf, sample_erlang_displacement, simulate_first_passage, simulate_strategy_value,
    solve_all, solve_single, validate, SolveResult, WienerHopfFactor,
};

use crate::config::RunConfig;
use crate::{io_err, CliError};

/// What a command produced: the text for stdout and the exit code.
#[derive(Debug)]
pub struct CmdOutcome {
    pub exit_code: i32,
    pub report: String,
}

impl CmdOutcome {
    fn ok(report: String) -> CmdOutcome {
        CmdOutcome {
            exit_code: 0,
            report,
        }
    }
}

/// Serialize a number with 17 significant digits (exact `f64` round-trip),
/// so repeated runs produce byte-identical files.
pub fn fmt_e(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| io_err(&path, source))
}

/// Evenly spaced grid of `n ≥ 2` points on `[lo, hi]`.
fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| lo + step * i as f64)
}

/// Grid bounds for `values.csv`: explicit config values, else
/// `[log K − 2, x₁⋆ + 2]`.
fn value_grid_bounds(cfg: &RunConfig, x1_star: f64) -> (f64, f64) {
    let lo = cfg.grid_lo.unwrap_or(cfg.contract.log_strike() - 2.0);
    let hi = cfg.grid_hi.unwrap_or(x1_star + 2.0);
    (lo, hi)
}

/// `validate`: run the standing-assumption checks and report them.
/// Exit 0 iff all pass, 2 otherwise.
pub fn cmd_validate(cfg: &RunConfig) -> CmdOutcome {
    let report = validate(&cfg.model, &cfg.contract, &cfg.refraction);
    CmdOutcome {
        exit_code: if report.all_passed() { 0 } else { 2 },
        report: report.to_string(),
    }
}

/// `solve`: compute the threshold ladder and value functions, write
/// `thresholds.csv` and `values.csv`.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome, CliError> {
    validate(&cfg.model, &cfg.contract, &cfg.refraction).ensure()?;
    let result = solve_all(&cfg.model, &cfg.contract, &cfg.refraction)?;

    let mut thresholds = String::from("k,x_star_log,s_star_price\n");
    for (i, &x) in result.thresholds.iter().enumerate() {
        writeln!(thresholds, "{},{},{}", i + 1, fmt_e(x), fmt_e(x.exp())).unwrap();
    }
    write_file(out, "thresholds.csv", &thresholds)?;

    let n = cfg.contract.n_exercises();
    let strike = cfg.contract.strike();
    let (lo, hi) = value_grid_bounds(cfg, result.thresholds[0]);
    let mut values = String::from("x");
    for k in 1..=n {
        write!(values, ",v{k}").unwrap();
    }
    values.push_str(",payoff\n");
    for x in grid(lo, hi, cfg.grid_points) {
        write!(values, "{}", fmt_e(x)).unwrap();
        for v in &result.values {
            write!(values, ",{}", fmt_e(v.evaluate(x))).unwrap();
        }
        writeln!(values, ",{}", fmt_e((x.exp() - strike).max(0.0))).unwrap();
    }
    write_file(out, "values.csv", &values)?;

    let mut report = String::new();
    for (i, &x) in result.thresholds.iter().enumerate() {
        writeln!(
            report,
            "k={} x_star={} s_star={}",
            i + 1,
            fmt_e(x),
            fmt_e(x.exp())
        )
        .unwrap();
    }
    writeln!(report, "wrote thresholds.csv ({n} rows)").unwrap();
    writeln!(report, "wrote values.csv ({} rows)", cfg.grid_points).unwrap();
    Ok(CmdOutcome::ok(report))
}

/// `sweep`: re-solve across the configured mean refraction times and write
/// `sweep.csv` (one row per (δ̄, k)). Cells run in parallel; rows appear in
/// input order. A failing cell is reported and skipped; the sweep continues
/// and the exit code is the first failure's (0 when every cell succeeded).
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome, CliError> {
    let shape = cfg.refraction.shape();
    let cells: Vec<(f64, Result<SolveResult, CliError>)> = cfg
        .sweep_delta_bars
        .par_iter()
        .map(|&delta_bar| {
            let solved = (|| {
                let refraction = multistop_core::RefractionSpec::from_mean(shape, delta_bar)?;
                validate(&cfg.model, &cfg.contract, &refraction).ensure()?;
                Ok(solve_all(&cfg.model, &cfg.contract, &refraction)?)
            })();
            (delta_bar, solved)
        })
        .collect();

    let mut csv = String::from("delta_bar,k,x_star\n");
    let mut report = String::new();
    let mut rows = 0usize;
    let mut exit_code = 0;
    for (delta_bar, solved) in &cells {
        match solved {
            Ok(result) => {
                for (i, &x) in result.thresholds.iter().enumerate() {
                    writeln!(csv, "{},{},{}", fmt_e(*delta_bar), i + 1, fmt_e(x)).unwrap();
                    rows += 1;
                }
            }
            Err(e) => {
                writeln!(report, "cell delta_bar={} failed: {e}", fmt_e(*delta_bar)).unwrap();
                if exit_code == 0 {
                    exit_code = e.exit_code();
                }
            }
        }
    }
    write_file(out, "sweep.csv", &csv)?;
    writeln!(
        report,
        "wrote sweep.csv ({rows} rows over {} refraction means, Erlang shape {shape})",
        cfg.sweep_delta_bars.len()
    )
    .unwrap();
    Ok(CmdOutcome { exit_code, report })
}

/// One line of the check report.
struct CheckList {
    lines: Vec<String>,
    failed: usize,
    skipped: usize,
}

impl CheckList {
    fn new() -> CheckList {
        CheckList {
            lines: Vec::new(),
            failed: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, name: &str, passed: bool, detail: String) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        self.lines.push(format!("{verdict} {name:<16} {detail}"));
        if !passed {
            self.failed += 1;
        }
    }

    /// Pass iff `measured` is finite and at most `tol`.
    fn check_tol(&mut self, name: &str, measured: f64, tol: f64) {
        let passed = measured.is_finite() && measured <= tol;
        self.record(name, passed, format!("measured={measured:.3e} tol={tol:.0e}"));
    }

    fn skip(&mut self, name: &str, reason: &str) {
        self.lines.push(format!("SKIP {name:<16} {reason}"));
        self.skipped += 1;
    }

    fn into_report(self) -> (String, bool) {
        let passed_count = self.lines.len() - self.failed - self.skipped;
        let mut text = self.lines.join("\n");
        text.push('\n');
        writeln!(
            text,
            "check: {passed_count} passed, {} failed, {} skipped",
            self.failed, self.skipped
        )
        .unwrap();
        (text, self.failed == 0)
    }
}

/// `check`: the full invariant suite plus Monte Carlo cross-checks, one
/// PASS/FAIL line per invariant with the measured value and its tolerance.
/// The report is written to `check_report.txt` and returned verbatim.
/// Exit 2 when the validation stage fails, 3 when any later check fails.
pub fn cmd_check(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome, CliError> {
    let validation = validate(&cfg.model, &cfg.contract, &cfg.refraction);
    if !validation.all_passed() {
        let report = validation.to_string();
        write_file(out, "check_report.txt", &report)?;
        return Ok(CmdOutcome {
            exit_code: 2,
            report,
        });
    }

    let mut checks = CheckList::new();
    for c in &validation.checks {
        checks.record(c.name, c.passed, c.detail.clone());
    }

    let factor = build_factor(&cfg.model, cfg.contract.alpha())?;
    let result = solve_all(&cfg.model, &cfg.contract, &cfg.refraction)?;
    analytic_checks(cfg, &factor, &result, &mut checks)?;
    mc_checks(cfg, &factor, &result, &mut checks)?;

    let (report, all_passed) = checks.into_report();
    write_file(out, "check_report.txt", &report)?;
    Ok(CmdOutcome {
        exit_code: if all_passed { 0 } else { 3 },
        report,
    })
}

/// Exact identities: Laplace exponent, roots, Wiener–Hopf factor algebra,
/// resolvent moments, and the threshold recursion.
fn analytic_checks(
    cfg: &RunConfig,
    factor: &WienerHopfFactor,
    result: &SolveResult,
    checks: &mut CheckList,
) -> Result<(), CliError> {
    let model = &cfg.model;
    let alpha = cfg.contract.alpha();
    let p = cfg.refraction.rate() + alpha;

    // ψ(0) = 0 by construction; measures accumulated rounding only.
    checks.check_tol("psi-at-zero", model.laplace_exponent(0.0)?.abs(), 1e-12);

    // Roots of ψ(β) = level actually satisfy their equation, at both levels
    // the solver uses (α for the stopping factor, q+α for the resolvent).
    let mut backsub: f64 = 0.0;
    for level in [alpha, p] {
        let roots = multistop_core::solve_roots(model, level)?;
        for &r in roots.all_roots() {
            backsub = backsub.max((model.laplace_exponent(r)? - level).abs());
        }
    }
    checks.check_tol("root-backsub", backsub, 1e-9);

    // Product form of ψ_α⁺ versus its partial-fraction expansion
    // ψ_α⁺(∞) + Σ_i A_i ρ_i / (ρ_i + β).
    let mut product_err: f64 = 0.0;
    for j in 1..=20 {
        let beta = 0.25 * f64::from(j);
        let product = factor.psi_plus(beta)?;
        let expansion: f64 = factor.psi_plus_inf()
            + factor
                .rho()
                .iter()
                .zip(factor.a())
                .map(|(&r, &a)| a * r / (r + beta))
                .sum::<f64>();
        product_err = product_err.max((product - expansion).abs() / product.abs().max(1e-300));
    }
    checks.check_tol("wh-partialfrac", product_err, 1e-10);

    // ν̄_i has transform ρ_i / ((ρ_i + β) ψ_α⁺(β)).
    let mut transform_err: f64 = 0.0;
    for beta in [0.0, 0.7, 1.9, 5.0, 12.0] {
        let psi_plus = factor.psi_plus(beta)?;
        for (i, &r) in factor.rho().iter().enumerate() {
            let expect = r / ((r + beta) * psi_plus);
            let got = factor.nu_bar()[i].transform(beta);
            transform_err = transform_err.max((got - expect).abs() / expect.abs().max(1e-300));
        }
    }
    checks.check_tol("nubar-transform", transform_err, 1e-10);

    // Σ_i A_i ν̄_i = δ_0 − ψ_α⁺(∞)·ν, atom-wise and density-wise.
    let atom: f64 = (0..factor.rho().len())
        .map(|i| factor.a()[i] * factor.nu_bar()[i].atom0())
        .sum();
    let atom_expect = 1.0 - factor.psi_plus_inf() * factor.nu().atom0();
    let mut combination_err = (atom - atom_expect).abs() / atom_expect.abs().max(1e-300);
    for y in [0.05, 0.4, 1.3, 2.6] {
        let lhs: f64 = (0..factor.rho().len())
            .map(|i| factor.a()[i] * factor.nu_bar()[i].density(y))
            .sum();
        let rhs = -factor.psi_plus_inf() * factor.nu().density(y);
        combination_err = combination_err.max((lhs - rhs).abs());
    }
    checks.check_tol("anu-identity", combination_err, 1e-10);

    // −Σ_i (A_i/ρ_i) ν̄_i'(z) ν̄_i'(y) = ν'(z+y). The ν̄_i only carry
    // densities when the factor has upward-jump poles and a creeping part,
    // so the identity is vacuous (0 = 0) outside that shape.
    if !factor.eta().is_empty() && factor.phi_inf().is_some() {
        let mut bivariate_err: f64 = 0.0;
        for z in [0.1, 0.5, 1.0, 2.0] {
            for y in [0.1, 0.5, 1.0, 2.0] {
                let lhs: f64 = -(0..factor.rho().len())
                    .map(|i| {
                        factor.a()[i] / factor.rho()[i]
                            * factor.nu_bar()[i].density(z)
                            * factor.nu_bar()[i].density(y)
                    })
                    .sum::<f64>();
                bivariate_err = bivariate_err.max((lhs - factor.nu().density(z + y)).abs());
            }
        }
        checks.check_tol("nunu-identity", bivariate_err, 1e-8);
    } else {
        checks.skip(
            "nunu-identity",
            "not applicable: factor has no upward-jump poles with creeping",
        );
    }

    // Resolvent of X at rate p = q + α: total mass 1, mean ψ'(0)/p.
    let roots_p = multistop_core::solve_roots(model, p)?;
    let mut mass = 0.0;
    let mut mean = 0.0;
    for &r in roots_p.all_roots() {
        let slope = model.laplace_exponent_derivative(r)?;
        mass += p / (r * slope);
        mean += p / (r * r * slope);
    }
    checks.check_tol("resolvent-mass", (mass - 1.0).abs(), 1e-10);
    let mean_expect = model.laplace_exponent_derivative(0.0)? / p;
    checks.check_tol("resolvent-mean", (mean - mean_expect).abs(), 1e-8);

    // The full recursion: ordering, first-order conditions, continuity,
    // base case against the closed form, and value dominance.
    let log_strike = cfg.contract.log_strike();
    let mut order_margin = result.thresholds[result.thresholds.len() - 1] - log_strike;
    for pair in result.thresholds.windows(2) {
        order_margin = order_margin.min(pair[0] - pair[1]);
    }
    checks.record(
        "thresh-order",
        order_margin >= 0.0,
        format!("min margin of log K < x_n* <= ... <= x_1* is {order_margin:.3e}"),
    );

    let foc = result
        .diagnostics
        .iter()
        .map(|d| d.foc_residual)
        .fold(0.0_f64, f64::max);
    checks.check_tol("foc-residual", foc, 1e-9);
    let continuity = result
        .diagnostics
        .iter()
        .map(|d| d.continuity_gap)
        .fold(0.0_f64, f64::max);
    checks.check_tol("continuity", continuity, 1e-8);

    let single = solve_single(model, &cfg.contract)?;
    let (lo, hi) = value_grid_bounds(cfg, result.thresholds[0]);
    let mut base_err: f64 = 0.0;
    let mut value_gap = f64::INFINITY;
    let mut dominance = f64::INFINITY;
    for x in grid(lo, hi, 201) {
        let closed = single.value.evaluate(x);
        let recursed = result.values[0].evaluate(x);
        base_err = base_err.max((recursed - closed).abs() / (1.0 + closed.abs()));
        for pair in result.values.windows(2) {
            value_gap = value_gap.min(pair[1].evaluate(x) - pair[0].evaluate(x));
        }
        dominance = dominance.min(closed - (x.exp() - cfg.contract.strike()).max(0.0));
    }
    checks.check_tol("base-case", base_err, 1e-10);
    if result.values.len() > 1 {
        checks.record(
            "value-order",
            value_gap > 0.0,
            format!("min grid gap v(k+1) - v(k) is {value_gap:.3e}"),
        );
    } else {
        checks.skip("value-order", "not applicable: single exercise right");
    }
    checks.record(
        "value-dominance",
        dominance >= -1e-9,
        format!("min grid margin v1 - payoff is {dominance:.3e}"),
    );
    Ok(())
}

/// Monte Carlo cross-checks with the configured `[mc]` settings: first
/// passage against the analytic transform, the full strategy value against
/// the recursion, resolvent samples against the analytic law, and bitwise
/// determinism of a repeated run.
fn mc_checks(
    cfg: &RunConfig,
    factor: &WienerHopfFactor,
    result: &SolveResult,
    checks: &mut CheckList,
) -> Result<(), CliError> {
    let model = &cfg.model;
    let alpha = cfg.contract.alpha();
    let x0 = cfg.contract.log_strike();
    let level = result.thresholds[0];

    let samples = simulate_first_passage(model, alpha, x0, level, &cfg.sim)?;
    let estimate = discounted_passage_transform(&samples, alpha, 0.0);
    let exact = first_passage_transform(factor, x0, level, 0.0)?;
    checks.record(
        "mc-passage",
        z_score(estimate.mean, estimate.std_error, exact) <= 3.0 && estimate.is_usable(),
        format!(
            "z={:.2} mc={:.6e} exact={:.6e} trunc={:.1e}",
            z_score(estimate.mean, estimate.std_error, exact),
            estimate.mean,
            exact,
            estimate.truncation_fraction
        ),
    );

    // The simulated exercise strategy uses the thresholds in chronological
    // order: the first right stops at x_n*, the last at x_1*.
    let order_of_use: Vec<f64> = result.thresholds.iter().rev().copied().collect();
    let strategy = simulate_strategy_value(
        model,
        &cfg.contract,
        &cfg.refraction,
        &order_of_use,
        x0,
        &cfg.sim,
    )?;
    let analytic = result.values[result.values.len() - 1].evaluate(x0);
    checks.record(
        "mc-strategy",
        z_score(strategy.mean, strategy.std_error, analytic) <= 3.0 && strategy.is_usable(),
        format!(
            "z={:.2} mc={:.6e} exact={:.6e} trunc={:.1e}",
            z_score(strategy.mean, strategy.std_error, analytic),
            strategy.mean,
            analytic,
            strategy.truncation_fraction
        ),
    );

    // Displacement at an Exp(q+α) time follows the analytic resolvent law.
    let p = cfg.refraction.rate() + alpha;
    let displaced = sample_erlang_displacement(model, 1, p, &cfg.sim)?;
    let cdf = resolvent_cdf(model, p)?;
    let ks = kolmogorov_smirnov(&displaced, cdf);
    checks.check_tol("mc-resolvent", ks, 1.63 / (displaced.len() as f64).sqrt());

    // Re-running the same simulation must reproduce the estimate bitwise.
    let rerun = simulate_first_passage(model, alpha, x0, level, &cfg.sim)?;
    let rerun_estimate = discounted_passage_transform(&rerun, alpha, 0.0);
    checks.record(
        "mc-determinism",
        rerun_estimate.mean.to_bits() == estimate.mean.to_bits()
            && rerun_estimate.std_error.to_bits() == estimate.std_error.to_bits(),
        "repeated run reproduces mean and std error bitwise".to_string(),
    );
    Ok(())
}

/// |mc − exact| in standard-error units; infinite when the spread is zero
/// but the values differ.
fn z_score(mc: f64, std_error: f64, exact: f64) -> f64 {
    let gap = (mc - exact).abs();
    if gap == 0.0 {
        0.0
    } else {
        gap / std_error
    }
}

#[cfg(test)]
// Frozen reference values keep the full printed precision of the tools
// that produced them, even where that exceeds what f64 can resolve.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use std::str::FromStr;

    const BASE: &str = "\
[model]
drift          = 0.36
sigma          = 0.2
down_jump_rate = 1.0
down_mix       = 1.0:1.0
up_jump_rate   = 0.0

[contract]
strike      = 50.0
alpha       = -0.02
n_exercises = 3

[refraction]
shape = 1
mean  = 1.0

[mc]
n_paths = 3000
h       = 0.002
seed    = 11

[output]
grid_points = 51

[sweep]
delta_bars = 0.5, 1.0, 2.0
";

    fn base_config() -> RunConfig {
        RunConfig::from_str(BASE).unwrap()
    }

    fn read(dir: &Path, name: &str) -> String {
        std::fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn validate_reports_all_checks() {
        let outcome = cmd_validate(&base_config());
        assert_eq!(outcome.exit_code, 0);
        assert!(outcome.report.lines().count() >= 5);
        assert!(outcome.report.lines().all(|l| l.starts_with("PASS")));
    }

    #[test]
    fn validate_flags_violated_assumptions() {
        // α far below ψ(1) = −0.12 breaks the discounting assumption.
        let cfg = RunConfig::from_str(&BASE.replace("alpha       = -0.02", "alpha       = -0.2"))
            .unwrap();
        let outcome = cmd_validate(&cfg);
        assert_eq!(outcome.exit_code, 2);
        assert!(outcome.report.contains("FAIL"));
    }

    #[test]
    fn solve_writes_csvs_with_exact_headers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config();
        let outcome = cmd_solve(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0);

        let thresholds = read(dir.path(), "thresholds.csv");
        let mut lines = thresholds.lines();
        assert_eq!(lines.next(), Some("k,x_star_log,s_star_price"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 3);
        let xs: Vec<f64> = rows
            .iter()
            .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(xs.windows(2).all(|w| w[0] >= w[1]), "{xs:?}");
        assert!(xs.iter().all(|&x| x > 50.0_f64.ln()));
        // Worked single threshold, up to the recursion's bisection width.
        assert!((xs[0] - 5.0371236047524124).abs() < 1e-12);

        let values = read(dir.path(), "values.csv");
        let mut lines = values.lines();
        assert_eq!(lines.next(), Some("x,v1,v2,v3,payoff"));
        assert_eq!(lines.count(), 51);
    }

    #[test]
    fn solve_outputs_are_byte_identical_across_runs() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = base_config();
        cmd_solve(&cfg, dir_a.path()).unwrap();
        cmd_solve(&cfg, dir_b.path()).unwrap();
        for name in ["thresholds.csv", "values.csv"] {
            assert_eq!(read(dir_a.path(), name), read(dir_b.path(), name), "{name}");
        }
    }

    #[test]
    fn sweep_emits_rows_in_input_order_with_constant_x1() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config();
        let outcome = cmd_sweep(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0);
        let csv = read(dir.path(), "sweep.csv");
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("delta_bar,k,x_star"));
        let rows: Vec<Vec<String>> = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        assert_eq!(rows.len(), 3 * 3);
        // Rows grouped by δ̄ in config order, k = 1..3 within each group.
        assert_eq!(rows[0][0], fmt_e(0.5));
        assert_eq!(rows[3][0], fmt_e(1.0));
        assert_eq!(rows[8][1], "3");
        let x1: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == "1")
            .map(|r| r[2].parse().unwrap())
            .collect();
        for &x in &x1[1..] {
            assert!((x - x1[0]).abs() < 1e-10, "x1* must not depend on delta_bar");
        }
    }

    #[test]
    fn sweep_records_failing_cells_and_continues() {
        // δ̄ = 100 ⇒ q = 0.01 ⇒ q + α = −0.01 < 0: the cell must fail
        // validation while the other cells still produce rows.
        let cfg = RunConfig::from_str(
            &BASE.replace("delta_bars = 0.5, 1.0, 2.0", "delta_bars = 1.0, 100.0"),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_sweep(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 2);
        assert!(outcome.report.contains("cell delta_bar=1.0000000000000000e2 failed"));
        let csv = read(dir.path(), "sweep.csv");
        assert_eq!(csv.lines().count(), 1 + 3, "one header plus the good cell");
    }

    #[test]
    fn check_passes_on_the_worked_model_and_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = base_config();
        let outcome = cmd_check(&cfg, dir_a.path()).unwrap();
        assert_eq!(outcome.exit_code, 0, "report:\n{}", outcome.report);
        assert!(outcome.report.contains("PASS wh-partialfrac"));
        assert!(outcome.report.contains("PASS mc-passage"));
        assert!(outcome.report.contains("SKIP nunu-identity"));
        assert!(outcome.report.contains("failed"));
        assert_eq!(outcome.report, read(dir_a.path(), "check_report.txt"));

        let again = cmd_check(&cfg, dir_b.path()).unwrap();
        assert_eq!(outcome.report, again.report, "check report must be reproducible");
    }

    #[test]
    fn check_exits_2_on_validation_failure() {
        let cfg = RunConfig::from_str(&BASE.replace("alpha       = -0.02", "alpha       = -0.2"))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_check(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 2);
        assert!(outcome.report.contains("FAIL"));
    }

    #[test]
    fn check_covers_the_two_sided_identities() {
        let cfg = RunConfig::from_str(
            &BASE
                .replace("up_jump_rate   = 0.0", "up_jump_rate   = 0.1\nup_mix = 1.0:3.0")
                .replace("n_exercises = 3", "n_exercises = 2"),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_check(&cfg, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0, "report:\n{}", outcome.report);
        assert!(outcome.report.contains("PASS nunu-identity"));
    }

    #[test]
    fn formatting_round_trips_f64() {
        for &x in &[
            5.0371236047524124_f64,
            -0.02,
            1.5402633661191956e2,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_e(x).parse::<f64>().unwrap(), x);
        }
    }
}
