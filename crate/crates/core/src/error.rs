use std::io;

use thiserror::Error;

use crate::data::CensoringKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a data-model invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A CSV data row (1-based, header excluded) failed validation.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("row {row}: unsupported censoring ({kind}); only right-censored observations can be estimated")]
    UnsupportedCensoring { row: usize, kind: CensoringKind },

    #[error("schema mismatch: expected columns [{expected}], found [{found}]")]
    Schema { expected: String, found: String },

    #[error("dimension mismatch: expected {expected} covariates, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("dataset contains no events")]
    NoEvents,

    #[error("separation / monotone partial likelihood: coefficient for covariate `{covariate}` diverges")]
    Separation { covariate: String },

    #[error("singular information matrix{0}; check the covariates for collinearity")]
    Singular(String),

    #[error(
        "fit did not converge after {iterations} iterations (max |gradient| = {gradient_norm:e})"
    )]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical procedures rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Separation { .. } | Error::Singular(_) | Error::NotConverged { .. }
        )
    }
}
