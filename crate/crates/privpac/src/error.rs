use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point or concept does not fit the domain it is used with.
    #[error("domain error: {0}")]
    Domain(String),
    /// An input violates a documented precondition (empty database, sample too small, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An enumeration or search budget was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// The requested class or mechanism is not supported by this operation.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Input length does not match the declared block structure.
    #[error("shape error: {0}")]
    Shape(String),
    /// A query does not match the estimate it is asked of.
    #[error("query error: {0}")]
    Query(String),
    /// Malformed text input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must lie in (0,1), got {v}"
        )))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}
