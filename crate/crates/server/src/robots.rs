//! Crawl-control policy served at `/robots.txt`, used to compare advisory
//! crawl exclusion against in-page defenses. The server never enforces it;
//! it only records whether each request was allowed by the active policy.

use serde::{Deserialize, Serialize};

/// Canonical robots.txt that disallows the common AI retrieval crawlers
/// site-wide. Byte-exact: clients and tests compare against this constant.
pub const BLOCK_AI_BOTS_ROBOTS: &str = "User-agent: OAI-SearchBot\nDisallow: /\n\nUser-agent: ChatGPT-User\nDisallow: /\n\nUser-agent: GPTBot\nDisallow: /\n";

/// User agents the blocking policy names.
pub const BLOCKED_AI_USER_AGENTS: [&str; 3] = ["OAI-SearchBot", "ChatGPT-User", "GPTBot"];

/// Which crawl-control file the corpus server publishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RobotsVariant {
    /// No robots.txt at all — requests for it get 404 and everything is
    /// treated as allowed.
    #[default]
    None,
    /// Serve [`BLOCK_AI_BOTS_ROBOTS`], disallowing the named AI crawlers
    /// everywhere.
    BlockAiBots,
}

impl RobotsVariant {
    /// Body served at `/robots.txt`, if any.
    pub fn body(self) -> Option<&'static str> {
        match self {
            RobotsVariant::None => None,
            RobotsVariant::BlockAiBots => Some(BLOCK_AI_BOTS_ROBOTS),
        }
    }

    /// Whether the active policy permits `user_agent` to fetch `path`.
    /// Fetching `/robots.txt` itself is always permitted — a crawler must
    /// be able to read the policy to honor it.
    pub fn allows(self, user_agent: &str, path: &str) -> bool {
        if path == "/robots.txt" {
            return true;
        }
        match self {
            RobotsVariant::None => true,
            RobotsVariant::BlockAiBots => !BLOCKED_AI_USER_AGENTS
                .iter()
                .any(|bot| user_agent_matches(user_agent, bot)),
        }
    }
}

/// Product-token match: the header value matches when the token appears as
/// a case-insensitive substring, the way real crawlers embed their product
/// name in a longer UA string.
fn user_agent_matches(header_value: &str, product_token: &str) -> bool {
    header_value
        .to_ascii_lowercase()
        .contains(&product_token.to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocking_policy_bytes_are_canonical() {
        assert_eq!(
            BLOCK_AI_BOTS_ROBOTS,
            "User-agent: OAI-SearchBot\nDisallow: /\n\nUser-agent: ChatGPT-User\nDisallow: /\n\nUser-agent: GPTBot\nDisallow: /\n"
        );
        assert!(BLOCK_AI_BOTS_ROBOTS.ends_with('\n'));
        assert!(!BLOCK_AI_BOTS_ROBOTS.contains(" \n"));
    }

    #[test]
    fn no_policy_allows_everyone() {
        assert!(RobotsVariant::None.allows("GPTBot", "/sites/s01/index.html"));
        assert!(RobotsVariant::None.body().is_none());
    }

    #[test]
    fn blocking_policy_disallows_named_bots_only() {
        let v = RobotsVariant::BlockAiBots;
        assert!(!v.allows("GPTBot/1.1 (+https://openai.com/gptbot)", "/sites/s01/index.html"));
        assert!(!v.allows("Mozilla/5.0 compatible; OAI-SearchBot/1.0", "/x"));
        assert!(!v.allows("chatgpt-user", "/x"));
        assert!(v.allows("Mozilla/5.0 (human browser)", "/sites/s01/index.html"));
        assert!(v.allows("curl/8.5", "/manifest.json"));
    }

    #[test]
    fn robots_file_itself_is_always_allowed() {
        assert!(RobotsVariant::BlockAiBots.allows("GPTBot", "/robots.txt"));
        assert!(RobotsVariant::None.allows("GPTBot", "/robots.txt"));
    }
}
