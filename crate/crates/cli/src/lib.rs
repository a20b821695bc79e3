//! Config-driven experiments on top of `nonlocal_core`: validation, k-sweeps,
//! reports, plots and a quick self-test.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

pub mod config;
pub mod output;
pub mod plot;
pub mod run;
pub mod selftest;

pub use config::{ExperimentConfig, Issue};
pub use run::{emit_plots, run_experiment, RunManifest};

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 1.
    Validation(Vec<Issue>),
    /// Exit code 1: `plot` on a directory without run outputs.
    MissingOutput(String),
    /// Exit code 2.
    Numerical(String),
    /// Exit code 2: filesystem trouble while writing results.
    Io(anyhow::Error),
    /// Exit code 3: the run finished but a configured check failed.
    Acceptance(Box<RunManifest>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::MissingOutput(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(issues) => {
                write!(f, "invalid config:")?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
            CliError::MissingOutput(m) => write!(f, "missing run output: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o failure: {e:#}"),
            CliError::Acceptance(m) => {
                write!(f, "checks failed:")?;
                for c in m.checks.iter().filter(|c| !c.passed) {
                    write!(f, "\n  {}: {}", c.name, c.detail)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for CliError {}
