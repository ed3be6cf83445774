//! Benchmark harness for the `isvrg` library.
//!
//! The binary (`isvrg`) reads a strict JSON experiment file, fans runs out
//! across optimizers and seeds, writes one CSV trace per (optimizer, seed)
//! cell plus a matched-budget comparison summary, sweeps λ grids, prints
//! bound reports, and checks analytic gradients against finite differences.
//!
//! The pieces are usable as a library too: [`config`] parses and resolves
//! experiment files, [`runner`] executes them, [`trace`] renders the output
//! files, and [`cli`] maps command-line invocations onto those parts.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod presets;
pub mod runner;
pub mod trace;

/// Failure buckets, one per process exit code.
///
/// `0` success, `1` configuration error (bad flags, malformed or rejected
/// experiment file), `2` numeric failure (every seed diverged, or a gradient
/// check exceeded its tolerance), `3` I/O error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// The process exit code this failure maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// Parse the process arguments, dispatch, and return the exit code.
pub fn cli_main() -> i32 {
    cli::run_from(std::env::args_os())
}
