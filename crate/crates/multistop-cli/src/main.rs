//! `multistop` — batch front end for the multiple-stopping solver.
//!
//! ```text
//! multistop solve --config configs/base.conf --out runs/base
//! ```
//!
//! See the crate docs in `lib.rs` for the command set, file formats, and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multistop_cli::commands::{self, CmdOutcome};
use multistop_cli::config::RunConfig;
use multistop_cli::CliError;

#[derive(Parser)]
#[command(
    name = "multistop",
    version,
    about = "Optimal multiple stopping with refraction periods: validate, solve, sweep, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing model assumptions and print the report.
    Validate(CommonArgs),
    /// Solve the threshold ladder; writes thresholds.csv and values.csv.
    Solve(CommonArgs),
    /// Re-solve across mean refraction times; writes sweep.csv.
    Sweep(CommonArgs),
    /// Run the invariant suite plus Monte Carlo cross-checks; writes
    /// check_report.txt.
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV and report files (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the [mc] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the [mc] number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the [mc] worker count.
    #[arg(long)]
    workers: Option<usize>,
}

/// A command body: parsed config plus output directory in, outcome out.
type CommandFn = fn(&RunConfig, &Path) -> Result<CmdOutcome, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Validate(args) => (args, |cfg, _| Ok(commands::cmd_validate(cfg))),
        Command::Solve(args) => (args, commands::cmd_solve),
        Command::Sweep(args) => (args, commands::cmd_sweep),
        Command::Check(args) => (args, commands::cmd_check),
    };
    match dispatch(args, run) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(
    args: &CommonArgs,
    run: fn(&RunConfig, &Path) -> Result<CmdOutcome, CliError>,
) -> Result<CmdOutcome, CliError> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    cfg.apply_overrides(args.seed, args.paths, args.workers);
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    run(&cfg, &args.out)
}
