//! Error type shared by every fallible operation in the crate.

use alloc::string::String;
use core::fmt;

/// Failure modes of model construction and training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix shapes disagree (channel counts, sample counts, label length).
    Dimension(String),
    /// Inputs are structurally valid but violate a contract (empty class,
    /// out-of-range label, bad hyperparameter).
    Validation(String),
    /// Requested subspace dimension exceeds the stacked channel count, so
    /// the shared projection cannot have orthonormal rows.
    SubspaceDim { requested: usize, limit: usize },
    /// A NaN or infinity appeared mid-computation; `stage` names the update
    /// that produced it and `iteration` the solver step.
    NonFinite {
        stage: &'static str,
        iteration: usize,
    },
}

impl Error {
    /// Stamps the solver iteration onto a non-finite failure bubbling up
    /// from a context that did not know it.
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::NonFinite { stage, .. } => Error::NonFinite { stage, iteration },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Validation(msg) => write!(f, "invalid input: {msg}"),
            Error::SubspaceDim { requested, limit } => write!(
                f,
                "subspace dimension {requested} exceeds the stacked channel count {limit}"
            ),
            Error::NonFinite { stage, iteration } => write!(
                f,
                "non-finite value produced by {stage} at iteration {iteration}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
