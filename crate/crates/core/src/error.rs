use thiserror::Error;

use crate::metric::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input document could not be parsed.
    #[error("malformed document: {0}")]
    Malformed(String),

    /// A document parsed but broke one of its own invariants.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    /// A metric failed validation; every violation is listed.
    #[error("metric failed validation: {}", render_violations(.0))]
    InvalidMetric(Vec<Violation>),

    #[error("unknown error type `{0}`")]
    UnknownErrorType(String),

    #[error("unknown severity level `{0}`")]
    UnknownSeverity(String),

    /// Caller broke an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Curve fitting produced a curve that is not a usable tolerance curve.
    #[error("tolerance curve fit rejected: {0}")]
    Fit(String),

    #[error("{words} words is outside the curve validity range [{from}, {to}] and extrapolation is disabled")]
    OutOfRange { words: u64, from: u64, to: u64 },

    #[error("no sampling plan satisfies the risk bounds with n <= {0}")]
    NoPlan(u64),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    /// True when the error stems from bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Fit(_) | Error::OutOfRange { .. } | Error::NoPlan(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Malformed(err.to_string())
    }
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{}: {}", v.path, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}
