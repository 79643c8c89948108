//! Error type for the adversarial harness.

use arshield_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] CoreError),

    /// Retrieval preconditions failed (e.g. a site no query can reach).
    #[error("retrieval: {0}")]
    Retrieval(String),

    /// Evaluation could not be computed (e.g. a rate with no denominator).
    #[error("evaluation: {0}")]
    Evaluation(String),

    /// The optimization loop cannot proceed (e.g. the ladder is exhausted).
    #[error("optimization: {0}")]
    Optimization(String),

    /// A credential the live clients need is missing from the environment.
    #[error("missing credential: set the {0} environment variable")]
    MissingCredential(&'static str),

    /// The remote endpoint rejected our credentials.
    #[error("authentication rejected: {0}")]
    AuthRejected(String),

    /// The remote endpoint kept failing or timing out.
    #[error("request failed after {attempts} attempts: {reason}")]
    Exhausted { attempts: u32, reason: String },

    /// The remote endpoint answered with something we cannot interpret.
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
