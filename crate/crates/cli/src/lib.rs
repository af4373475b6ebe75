//! Config-driven experiments: return curves, the averaged inequality with
//! its rate condition, the sharpness probe, the dominance probe and the
//! 3-path and odd-deleted lattice figure data, all written as CSV.

pub mod config;
pub mod format;
pub mod run;
pub mod summary;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use run::{execute, run_file, Outcome, RunOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 1 for unreadable configs, 2 for rejected ones, 4 for failures
    /// during the run. 3 is reserved for detected violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 4,
        }
    }
}
