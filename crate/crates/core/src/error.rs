use alloc::string::String;

/// Errors raised by the numerical core.
///
/// `Domain` covers rejected inputs, `Numeric` covers solver and fitting
/// failures, `State` covers misuse of partially built objects.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        /// Last bracket held by a root finder, when one was involved.
        bracket: Option<(f64, f64)>,
    },
    #[error("state error: {0}")]
    State(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            bracket: None,
        }
    }

    /// True for errors caused by the caller's input rather than by a
    /// numerical failure.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::State(_))
    }
}
