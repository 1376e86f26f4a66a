use thiserror::Error;

pub type Result<T> = std::result::Result<T, GepError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GepError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is rank deficient (numerical rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("penalty lambda = {lambda} shrinks the estimate to zero (lambda_max = {lambda_max})")]
    OverPenalized { lambda: f64, lambda_max: f64 },

    #[error("degenerate column {column}: {reason}")]
    DegenerateColumn { column: usize, reason: String },

    #[error("tuning failed: {0}")]
    TuningFailed(String),
}

impl GepError {
    /// Short stable identifier, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            GepError::InvalidInput(_) => "invalid_input",
            GepError::ShapeMismatch(_) => "shape_mismatch",
            GepError::RankDeficient { .. } => "rank_deficient",
            GepError::NotPositiveDefinite(_) => "not_positive_definite",
            GepError::OverPenalized { .. } => "over_penalized",
            GepError::DegenerateColumn { .. } => "degenerate_column",
            GepError::TuningFailed(_) => "tuning_failed",
        }
    }
}
