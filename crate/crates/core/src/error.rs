use thiserror::Error;

/// Errors raised by field evaluation, control, simulation and I/O.
#[derive(Debug, Error)]
pub enum CvfError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Query at (or inside the guard disk around) the singular point of the field.
    #[error("singular point: |p - p_delta| = {r_delta:e} m is inside the guard radius {guard:e} m")]
    Singular { r_delta: f64, guard: f64 },

    /// The configuration belongs to the non-converging set of the closed loop.
    #[error("configuration in the non-converging set: {0}")]
    NonConverging(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An integral curve never came within the passage tolerance of the target.
    #[error("no passage within {tolerance} m of the target after {length} m of arc")]
    NoPassage { tolerance: f64, length: f64 },

    /// A named feasibility inequality failed.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CvfError>;
