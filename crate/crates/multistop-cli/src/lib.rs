//! Command-line front end for the multistop solver.
//!
//! The binary reads a sectioned `key = value` [config file](config), builds
//! the model/contract/refraction triple, and dispatches one of four
//! subcommands (see [`commands`]):
//!
//! * `validate` — run the standing-assumption checks and print the report;
//! * `solve`    — compute the threshold ladder and value functions, written
//!   as `thresholds.csv` and `values.csv`;
//! * `sweep`    — re-solve across a list of mean refraction times, written
//!   as `sweep.csv`;
//! * `check`    — run the internal consistency suite (root back-substitution,
//!   factorization identities, resolvent moments, Monte Carlo cross-checks)
//!   and write `check_report.txt`.
//!
//! All numeric output is formatted with 17 significant digits so repeated
//! runs with the same config and seed are byte-identical.
//!
//! Exit codes: `0` success, `2` validation failure, `3` numeric failure,
//! `4` config parse error; `1` is reserved for I/O problems (not part of the
//! solver contract, but a distinct code keeps scripting honest).

pub mod commands;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

/// Anything the command layer can fail with, mapped onto exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// The config file could not be parsed (exit 4).
    #[error("{0}")]
    Config(#[from] config::ConfigError),

    /// The solver rejected the inputs or a computation failed; exit 2 for
    /// validation-class errors, 3 for numeric-class ones.
    #[error(transparent)]
    Core(#[from] multistop_core::Error),

    /// A file could not be read or written (exit 1).
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::Core(e) => match e.kind() {
                multistop_core::ErrorKind::Validation => 2,
                multistop_core::ErrorKind::Numeric => 3,
            },
            CliError::Io { .. } => 1,
        }
    }

    /// Short class label used in the `error[<class>]:` prefix on stderr.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => match e.kind() {
                multistop_core::ErrorKind::Validation => "validation",
                multistop_core::ErrorKind::Numeric => "numeric",
            },
            CliError::Io { .. } => "io",
        }
    }
}

/// Wrap an I/O error with the path it occurred on.
pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
