use serde::Serialize;

/// Diagnostics attached to a quadrature failure.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct QuadDiagnostics {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failure: {}", .0.detail)]
    Quadrature(QuadDiagnostics),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("discrete coercivity violated: {0}")]
    Coercivity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn quadrature(detail: impl Into<String>, value: f64, error: f64, evals: usize) -> Self {
        Error::Quadrature(QuadDiagnostics {
            value,
            error,
            evals,
            detail: detail.into(),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
