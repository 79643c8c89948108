//! Error type for corpus generation and the fixture server.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("server startup error: {0}")]
    Startup(String),

    #[error("crawl log error: {0}")]
    CrawlLog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
