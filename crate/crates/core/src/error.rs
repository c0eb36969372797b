use thiserror::Error;

/// Errors produced by the structinfer library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index set {set:?} is not allowed for the {norm} norm")]
    NotAllowed { set: Vec<usize>, norm: &'static str },

    #[error("matrix {0} is singular or numerically degenerate")]
    Singular(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("coordinate {index}: {source}")]
    AtCoordinate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(got: usize, expected: usize, context: &'static str) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got,
            context,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
