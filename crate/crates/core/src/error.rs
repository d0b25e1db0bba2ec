use thiserror::Error;

/// Errors raised by corpus handling, model fitting and selection.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad user-supplied data or parameters (unreadable corpus, empty corpus,
    /// reserved labels, invalid generator settings).
    #[error("input error: {0}")]
    Input(String),

    /// A numeric argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an operation's precondition (mismatched orders,
    /// non-nested likelihoods, out-of-range ids).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{what} failed to converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by what the user handed us rather than by a bug.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Io(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
