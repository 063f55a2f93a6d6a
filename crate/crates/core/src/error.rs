use thiserror::Error;

/// Upper bound on `1/(mu h^lambda)` before `exp` leaves comfortable double range.
pub const OVERFLOW_EXPONENT_LIMIT: f64 = 700.0;

#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("overflow guard: exponent 1/(mu h^lambda) = {exponent} exceeds {limit}; bandwidth too small for double precision")]
    OverflowGuard { exponent: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("limit theory requires lambda = 2, error model has lambda = {0}")]
    TheoremInapplicable(f64),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("grid too coarse: spacing {spacing} exceeds {limit}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl DeconvError {
    /// Process exit code used by the command-line front end.
    ///
    /// 3 marks the numeric overflow guard, 2 configuration and input
    /// problems, 1 I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DeconvError::OverflowGuard { .. } => 3,
            DeconvError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, DeconvError>;
