//! Problem files, scenario orchestration and the quadruple-tank reproduction
//! behind the `mpl` binary.

pub mod output;
pub mod problem;
pub mod reproduce;
pub mod scenario;

pub use problem::{parse_problem, ProblemFile};
pub use reproduce::reproduce_qtp;
pub use scenario::{run_scenario, HorizonRecord, RunConfig, Scenario, ScenarioResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// `pointer` is an RFC 6901 JSON pointer into the problem file.
    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mpl_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub(crate) fn parse(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Parse { pointer: pointer.into(), message: message.into() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ATTACK_FAILED: i32 = 1;
    pub const HARD_ERROR: i32 = 2;
}
