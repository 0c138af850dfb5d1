use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension `{dimension}`: {reason}")]
    Dimension { dimension: String, reason: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel: {0}")]
    Kernel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("evaluator: {0}")]
    Evaluator(String),

    #[error("run state: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dimension(name: &str, reason: impl Into<String>) -> Self {
        Error::Dimension {
            dimension: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 validation, 2 evaluator/protocol, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Evaluator(_) => 2,
            Error::Numerical(_) | Error::InsufficientData(_) => 3,
            _ => 1,
        }
    }
}
