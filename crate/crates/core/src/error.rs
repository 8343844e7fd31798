use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode index {index} is not valid for this model: {reason}")]
    IndexError { index: u64, reason: String },
    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),
    #[error("position {x} lies outside the configuration space [{lo}, {hi}]")]
    DomainError { x: f64, lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("state has no nonzero coefficients")]
    EmptyState,
    #[error("power-law tail with exponent s = {0} is not square summable (need s > 1/2)")]
    NotNormalizable(f64),
    #[error("invalid coefficient specification: {0}")]
    InvalidSpec(String),
    #[error("empty spectral window: a = {a} must be below b = {b}")]
    BadWindow { a: f64, b: f64 },
    #[error("multiplier is not in the extension family on this state: {0}")]
    NotInExtensionFamily(String),
    #[error("difference step must be nonzero and finite, got {0}")]
    BadStep(f64),
    #[error("grid too coarse for box counting: {0}")]
    ResolutionError(String),
    #[error("density {rho:e} at x = {x} is below the node guard")]
    NodeProximity { x: f64, rho: f64 },
    #[error("state not in D(H): {0}")]
    DomainRequired(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
