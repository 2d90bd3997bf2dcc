use thiserror::Error;

/// Errors produced by the numerical routines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("point {point:?} lies outside {region}")]
    Domain { point: Vec<f64>, region: String },
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("non-finite integrand at x = {x:?}, y = {y:?}")]
    NonFinite { x: Vec<f64>, y: Vec<f64> },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("cover error: {0}")]
    Cover(String),
    #[error("basis rejected: {0}")]
    BasisRejected(String),
    #[error("constraint violation: {0}")]
    Constraint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(point: &[f64], region: impl Into<String>) -> Self {
        Error::Domain {
            point: point.to_vec(),
            region: region.into(),
        }
    }
}
