use thiserror::Error;

/// Errors raised by the numerical and decision-theoretic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A prior family cannot be combined with the endpoint model.
    #[error("prior `{prior}` is not compatible with the {model} endpoint")]
    Incompatible {
        prior: &'static str,
        model: &'static str,
    },

    /// Root finding was given an interval without a sign change.
    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    /// The integrand produced a non-finite value.
    #[error("integration failed: {0}")]
    Integration(String),

    /// A rejection region expected to be an upper interval is not.
    #[error("rejection region is not monotone: {0}")]
    NonMonotone(String),

    /// The scenario makes a ratio or inversion undefined.
    #[error("degenerate scenario: {0}")]
    Degenerate(String),

    /// A scenario document failed validation.
    #[error("invalid scenario: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
