//! Fixture-site corpus server: deterministic generation of themed test
//! sites, an HTTP server that serves them while logging every request, and
//! crawl-control tooling (robots.txt variants, compliance reporting, and
//! scripted compliant/non-compliant crawlers).

pub mod corpus;
pub mod crawl;
pub mod error;
pub mod robots;
pub mod serve;

pub use corpus::{generate_corpus, load_corpus, write_corpus, SiteFixture, CATEGORIES};
pub use crawl::{
    crawl_compliance_report, crawl_compliant, crawl_ignoring, http_get, load_crawl_log,
    ComplianceRow, CrawlLogEntry, CrawlOutcome, HttpResponse,
};
pub use error::ServerError;
pub use robots::{RobotsVariant, BLOCKED_AI_USER_AGENTS, BLOCK_AI_BOTS_ROBOTS};
pub use serve::{start_server, wait_for_interrupt, ServerConfig, ServerHandle};
