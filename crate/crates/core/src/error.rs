use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller broke a precondition: wrong dimension, bad parameter, missing gradient.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("objective `{0}` not found")]
    NotFound(String),

    /// The objective produced a non-finite value.
    #[error("non-finite objective value {value} at {point:?}")]
    NumericDomain { point: Vec<f64>, value: f64 },

    #[error("outer iteration {iteration}: {source}")]
    AtOuterIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Strips outer-iteration wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtOuterIteration { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::NumericDomain { .. })
    }
}
