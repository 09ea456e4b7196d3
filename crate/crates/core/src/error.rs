use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("integration failure at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("envelope violated at t = {t}: margin {margin:e} ({which})")]
    EnvelopeViolation { t: f64, margin: f64, which: String },
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
