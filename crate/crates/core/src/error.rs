//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the nowcasting toolkit.
#[derive(Error, Debug)]
pub enum Error {
    /// CSV header or companion schema is malformed.
    #[error("schema error: {0}")]
    Schema(String),

    /// A series has a hole inside the declared sample range.
    #[error("data gap in series `{series}` of unit `{unit}` at {date}")]
    DataGap {
        unit: String,
        series: String,
        date: String,
    },

    /// Observations of one series arrive at inconsistent spacing.
    #[error("frequency error: {0}")]
    Frequency(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A lag window reaches before the start of the sample.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// Evaluation point outside the dictionary domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values where finite numbers are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Iteration cap reached before the stopping rule; carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    /// Response is identically zero after demeaning; no usable penalty path.
    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    /// Weight-scheme input sums to zero or is otherwise unusable.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Cross-validation fold construction failed.
    #[error("fold error: {0}")]
    Fold(String),

    /// Unknown unit or series name.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Run configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tools:
    /// 2 config, 3 data, 4 numeric/convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema(_) | Error::Json(_) => 2,
            Error::Numeric(_) | Error::Convergence { .. } | Error::DegeneratePath(_) => 4,
            _ => 3,
        }
    }
}
