use std::path::PathBuf;

use crate::model::Violation;

/// Errors surfaced by the planning toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("instance is invalid ({} violation(s)): {}", .0.len(), summarize(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("load tech `{0}` has a negative variable cost but no equality mandate")]
    NegativeCostWithoutEqualityMandate(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown expectation-constraint handle `{0}`")]
    UnknownHandle(String),

    #[error("invalid subproblem spec: {0}")]
    InvalidSubproblem(String),

    #[error("column {column} ({name}): value {value} outside bounds [{lower}, {upper}]")]
    ValueOutOfBounds {
        column: usize,
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("column {column} ({name}) is integer but value {value} is not integral")]
    NonIntegralValue { column: usize, name: String, value: f64 },

    #[error("model has integer columns; LP duals are undefined")]
    IntegerColumnsPresent,

    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("solver backend failed: {message}")]
    BackendFailure { message: String, diagnostics: String },

    #[error("failed to write model file {path}: {source}")]
    ModelWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("LP parse error at line {line}: {message}")]
    LpParse { line: usize, message: String },

    #[error("subproblem for scenario `{scenario}` is {status}; the relaxed subproblem should always be feasible")]
    SubproblemFailed { scenario: String, status: String },

    #[error("weight balance violated: |sum_w pi_w w_w| = {0:e} on some coordinate")]
    WeightImbalance(f64),

    #[error("candidate first stage violates first-stage constraints: {0}")]
    InfeasibleCandidate(String),

    #[error("brute-force lattice has {size} points (limit {limit})")]
    LatticeTooLarge { size: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}:{column}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("time-series `{table}`: {message}")]
    Dimension { table: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
