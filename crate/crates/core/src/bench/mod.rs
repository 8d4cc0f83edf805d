//! Experiment orchestration: config files, seeded runs, comparison tables and
//! schedule traces.

pub mod compare;
pub mod config;
pub mod run;
pub mod trace;

use std::fmt;

pub use compare::{compare, ComparisonRow};
pub use config::{DataConfig, ExperimentConfig, MethodConfig};
pub use run::{prepare, run, run_config, Prepared, RunRecord, Selection};
pub use trace::{trace, TraceRow};

use crate::error::Error;

/// Error of a CLI-level operation, split by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, data or arguments; nothing was run.
    Validation(Error),
    Runtime(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "validation error: {e}"),
            Failure::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

impl std::error::Error for Failure {}

pub type Outcome<T> = std::result::Result<T, Failure>;

pub(crate) fn validation(e: Error) -> Failure {
    Failure::Validation(e)
}

pub(crate) fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
