use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The least-squares system has no unique solution; `directions`
    /// names the regressor terms that dominate each null direction.
    #[error("rank-deficient system ({context}); deficient directions: {}", directions.join(", "))]
    RankDeficient {
        context: String,
        directions: Vec<String>,
    },

    #[error("constraint row {row} contradicts earlier rows (residual {residual:e})")]
    InconsistentConstraints { row: usize, residual: f64 },

    #[error("innovation covariance is ill-conditioned (condition estimate {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file {path}: {message}")]
    ModelFile { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::InconsistentConstraints { .. }
                | Error::SingularInnovation { .. }
        )
    }
}
