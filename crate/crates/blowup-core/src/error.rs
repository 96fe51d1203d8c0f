use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("quadrature weight eta={quad} does not match inner-product weight eta={weight}")]
    WeightMismatch { quad: f64, weight: f64 },
    #[error("degree {degree} exceeds what the quadrature integrates exactly (max {max})")]
    DegreeOverflow { degree: usize, max: usize },
    #[error("quadrature node {node} lies outside the grid [-{y_max}, {y_max}]")]
    DomainCoverage { node: f64, y_max: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
    #[error("non-finite state after s = {last_s}")]
    NonFinite { last_s: f64 },
    #[error("no capture: {0}")]
    NoCapture(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("stability search failed: {0}")]
    Stability(String),
}

pub type Result<T> = core::result::Result<T, Error>;
