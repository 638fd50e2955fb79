use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value-level argument is outside its documented domain.
    #[error("invalid {what}: {reason}")]
    InvalidArgument { what: &'static str, reason: String },

    /// A hypothesis of a check is violated by the requested parameters.
    #[error("hypothesis violated ({context}): {reason}")]
    Hypothesis { context: &'static str, reason: String },

    /// An evaluation point hit a singular configuration of a closed form.
    #[error("singular evaluation: {0}")]
    Singular(String),

    /// An exact identity that must hold failed.
    #[error("hard assert failed: {0}")]
    Assert(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn hypothesis(context: &'static str, reason: impl Into<String>) -> Self {
        Error::Hypothesis {
            context,
            reason: reason.into(),
        }
    }
}
