//! Config-driven runner for the torkin estimators and property suites.
//!
//! One JSON document describes a run; the runner writes `summary.json`
//! (resolved config, content hash, results, wall time) and CSV logs.

// Validity checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use std::fmt;

pub use config::Config;
pub use run::{config_hash, load_config, run_config, run_path, RunOptions, RunOutcome};

/// Failure classes, each with its own process exit code.
#[derive(Clone, Debug, PartialEq)]
pub enum CliError {
    /// Bad flags or config document: exit 1.
    Validation(String),
    /// An estimator or I/O failure: exit 2.
    Estimator(String),
    /// A property suite reported failures: exit 3.
    Suite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Estimator(_) => 2,
            Self::Suite(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "validation error: {m}"),
            Self::Estimator(m) => write!(f, "estimator error: {m}"),
            Self::Suite(m) => write!(f, "suite failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
