//! Crate-wide error type with stable machine-readable categories.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model construction failed: {0}")]
    ModelConstruction(String),

    #[error("observation '{observation}' has zero probability under action '{action}'")]
    ImpossibleObservation { action: String, observation: String },

    #[error("no compatible version of '{child}' under parent assignment {assignment}")]
    IncompatibleAssignment { child: String, assignment: String },

    #[error("state space of {size} states exceeds cap of {cap}")]
    CapExceeded { size: u128, cap: u64 },

    #[error("path enumeration in component '{component}' exceeded cap of {cap} paths")]
    PathExplosion { component: String, cap: u64 },

    #[error("{count} actions exceeds solver limit of {limit}")]
    TooManyActions { count: usize, limit: usize },

    #[error("brute-force oracle refused: {count} actions exceeds guard of {guard}")]
    BruteForceGuard { count: usize, guard: usize },

    #[error("deadline exceeded")]
    Timeout,

    #[error("simulation reached an undefined branch: {0}")]
    HarnessBug(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable category string, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) | Error::Parse(_) => "invalid-input",
            Error::ModelConstruction(_) | Error::IncompatibleAssignment { .. } => "model-error",
            Error::ImpossibleObservation { .. } => "impossible-observation",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::PathExplosion { .. } => "path-explosion",
            Error::TooManyActions { .. } | Error::BruteForceGuard { .. } => "model-too-large",
            Error::Timeout => "timeout",
            Error::HarnessBug(_) => "harness-bug",
            Error::Io(_) => "io",
        }
    }
}
