use thiserror::Error;

/// Errors raised by the state-transition operations.
///
/// Every failing operation leaves its input state untouched; the variants map
/// one-to-one onto the stable names returned by [`Error::name`], which the CLI
/// prints on standard error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("count too small: need at least {need} observations, have {have}")]
    CountTooSmall { need: usize, have: usize },

    #[error("cannot remove {remove} observations from a sample of {have}")]
    RemoveTooMany { remove: usize, have: usize },

    #[error("posterior-mean K form is undefined for an empty prior")]
    DegenerateForm,

    #[error("matrix is not positive definite: pivot {index} is {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("downdate lost positive definiteness at pivot {index}")]
    LostDefiniteness { index: usize },

    #[error("singular factor: D[{index}] = {value:e}")]
    SingularFactor { index: usize, value: f64 },

    #[error("column index {index} out of range for {len} columns")]
    IndexError { index: usize, len: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
}

impl Error {
    /// Stable machine-readable name for scripting against the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::CountTooSmall { .. } => "CountTooSmall",
            Error::RemoveTooMany { .. } => "RemoveTooMany",
            Error::DegenerateForm => "DegenerateForm",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::LostDefiniteness { .. } => "LostDefiniteness",
            Error::SingularFactor { .. } => "SingularFactor",
            Error::IndexError { .. } => "IndexError",
            Error::NonFinite { .. } => "NonFinite",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
