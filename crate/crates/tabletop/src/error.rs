use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rank deficiency in {context}: eigenvalue {eigenvalue:e} below tolerance {tol:e}")]
    RankDeficient {
        context: String,
        eigenvalue: f64,
        tol: f64,
    },

    #[error("prior lost rank at step {step}: minimum eigenvalue {eigenvalue:e}")]
    RankLoss { step: usize, eigenvalue: f64 },

    #[error("precondition for mode `{mode}` not met: {detail}")]
    Mode { mode: &'static str, detail: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
