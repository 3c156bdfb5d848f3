use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("grid too large for dense assembly: {points} sites exceeds the cap of {cap}")]
    OversizeGrid { points: usize, cap: usize },

    #[error("ellipticity failure: smallest Hermitian-part eigenvalue {eigenvalue:.6e} at site {site}")]
    EllipticityFailure { site: usize, eigenvalue: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("LAPACK {routine} returned info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error(
        "kernel obstruction: input has mean component of relative size {relative:.3e}; \
         L^(-1/2) is defined only on the mean-zero complement of the constants"
    )]
    KernelObstruction { relative: f64 },

    #[error("sector mismatch: symbol class half-angle {mu:.4} does not exceed the operator angle {omega:.4}")]
    SectorMismatch { mu: f64, omega: f64 },

    #[error("molecule construction failed: {0}")]
    Molecule(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
