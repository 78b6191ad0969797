use thiserror::Error;

/// A cumulant evaluated outside the region where the exponential moment exists.
///
/// For bases with a finite critical order (NIG, Gamma) this is how a missing
/// moment `<eps^n>` shows up.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cumulant argument {argument} outside the domain of the {basis} basis (requires {bound})")]
pub struct DomainError {
    pub basis: &'static str,
    pub argument: f64,
    pub bound: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
