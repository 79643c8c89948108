//! Error type shared by the core domain model and the HTML engine.

use thiserror::Error;

/// Errors raised by core-model validation and the HTML engine.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A configuration string (measure name, position, visibility, stage…)
    /// did not match any known identifier.
    #[error("configuration error: {0}")]
    Config(String),

    /// A defense goal failed validation (empty subset, invalid URL…).
    #[error("invalid defense goal: {0}")]
    InvalidGoal(String),

    /// A defense policy violated a stage invariant.
    #[error("invalid defense policy: {0}")]
    InvalidPolicy(String),

    /// A query violated the round/kind contract.
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Raw HTML input was unusable (empty document).
    #[error("invalid page: {0}")]
    InvalidPage(String),

    /// The page could not be prepared for injection.
    #[error("injection error: {0}")]
    Injection(String),
}

impl CoreError {
    /// Shorthand used by string-parsing `FromStr` impls.
    pub(crate) fn unknown(kind: &str, value: &str, expected: &str) -> Self {
        CoreError::Config(format!("unknown {kind} `{value}` (expected one of: {expected})"))
    }
}
