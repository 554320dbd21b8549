use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("comparison solution blows up at t = {t}: denominator {denominator:e}")]
    BlowUp { t: f64, denominator: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no closed form available: {0}")]
    NoClosedForm(String),

    #[error("point outside the valid region: {0}")]
    OutsideDomain(String),

    #[error("frame is not orthonormal: {0}")]
    NotOrthonormal(String),

    #[error("test field support meets the boundary of the varifold (boundary point {index})")]
    FieldTouchesBoundary { index: usize },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
