use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label must be -1 or +1, got {0}")]
    InvalidLabel(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dataset must contain at least one sample")]
    EmptyDataset,

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("search space of {size} points exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },

    #[error("invalid atomic uncertainty set: {0}")]
    InvalidAtomicSet(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("gram matrix is not positive semidefinite (quadratic form {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("sample outside the domain box: {0}")]
    OutsideDomain(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
