use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("argument {x} is outside the domain of the {branch} branch of Lambert W")]
    LambertDomain { x: f64, branch: &'static str },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("index {index} out of range {lo}..={hi}")]
    Index { index: usize, lo: usize, hi: usize },

    #[error(
        "step-size precondition violated: log norm of the lifted matrix is {mu} (must be > 0); \
         enable the non-positive log-norm fallback to continue"
    )]
    NonPositiveLogNorm { mu: f64 },

    #[error(
        "time grid too coarse: admissible step {raw_step:e} s is below one tick of {tick:e} s; \
         increase n_bar or alpha"
    )]
    Resolution { raw_step: f64, tick: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the field of a parameter error with `section.`.
    pub fn within(self, section: &str) -> Self {
        match self {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("{section}.{field}"),
                reason,
            },
            other => other,
        }
    }
}
