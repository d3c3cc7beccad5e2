use alloc::string::String;

/// Errors raised by model construction, sampling, training and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Exact enumeration was requested for a model whose smaller layer is too large.
    #[error("exact enumeration needs a layer of at most {limit} units, smallest layer has {units}")]
    Capacity { units: usize, limit: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("spin {index} has value {value}, expected -1 or +1")]
    SpinOutOfAlphabet { index: usize, value: i8 },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    /// Two adjacent nodes received the same colour; the graph is not bipartite.
    #[error("odd cycle through edge ({0}, {1})")]
    OddCycle(usize, usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite { what: what.into() }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
