use thiserror::Error;

/// Errors raised by the estimators, the data loader and the study engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("information matrix is not positive definite (pivot {pivot})")]
    SingularInformation { pivot: usize },

    #[error("non-finite mean for linear predictor {eta}")]
    Evaluation { eta: f64 },

    #[error("row {row}: {msg}")]
    Validation { row: usize, msg: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no separation detected")]
    NoSeparation,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
