//! Crawl traffic accounting and scripted crawler clients.
//!
//! The corpus server logs every request it sees; this module reads that
//! log back, summarizes robots compliance per user agent, and provides two
//! scripted crawlers — one that honors robots.txt and one that ignores it —
//! so advisory crawl control can be compared against in-page defenses.

use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::net::TcpStream;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ServerError;

/// One logged request. The schema is fixed: exactly these four fields,
/// with `ts` in epoch milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlLogEntry {
    pub ts: u64,
    pub path: String,
    pub user_agent: String,
    pub allowed_by_robots: bool,
}

/// Read a JSONL crawl log produced by the corpus server.
pub fn load_crawl_log(path: &Path) -> Result<Vec<CrawlLogEntry>, ServerError> {
    let raw = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: CrawlLogEntry = serde_json::from_str(line).map_err(|e| {
            ServerError::CrawlLog(format!("line {}: {e}", lineno + 1))
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Per-user-agent compliance summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceRow {
    pub user_agent: String,
    /// Total requests this agent made.
    pub requests: u64,
    /// How many of those requests hit paths robots disallowed for it.
    pub disallowed_but_fetched: u64,
}

impl ComplianceRow {
    /// Fraction of this agent's requests that violated the robots policy.
    pub fn disallowed_rate(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.disallowed_but_fetched as f64 / self.requests as f64
        }
    }
}

/// Group a crawl log by user agent, counting robots violations. Rows come
/// back sorted by user agent for stable output.
pub fn crawl_compliance_report(entries: &[CrawlLogEntry]) -> Vec<ComplianceRow> {
    let mut by_agent: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for entry in entries {
        let slot = by_agent.entry(&entry.user_agent).or_insert((0, 0));
        slot.0 += 1;
        if !entry.allowed_by_robots {
            slot.1 += 1;
        }
    }
    by_agent
        .into_iter()
        .map(|(ua, (requests, disallowed))| ComplianceRow {
            user_agent: ua.to_owned(),
            requests,
            disallowed_but_fetched: disallowed,
        })
        .collect()
}

/// Minimal HTTP response as seen by the scripted crawlers.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Plain HTTP/1.1 GET over a fresh TCP connection (`Connection: close`).
/// `addr` is `host:port`, e.g. `127.0.0.1:4555`.
pub fn http_get(addr: &str, path: &str, user_agent: &str) -> Result<HttpResponse, ServerError> {
    let mut stream = TcpStream::connect(addr)
        .map_err(|e| ServerError::CrawlLog(format!("connect {addr}: {e}")))?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    stream.set_write_timeout(Some(Duration::from_secs(10)))?;
    let request = format!(
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nUser-Agent: {user_agent}\r\nAccept: */*\r\nConnection: close\r\n\r\n"
    );
    stream.write_all(request.as_bytes())?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    parse_http_response(&raw)
}

fn parse_http_response(raw: &[u8]) -> Result<HttpResponse, ServerError> {
    let text = String::from_utf8_lossy(raw);
    let (head, body) = text
        .split_once("\r\n\r\n")
        .ok_or_else(|| ServerError::CrawlLog("malformed HTTP response: no header end".into()))?;
    let status_line = head.lines().next().unwrap_or_default();
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            ServerError::CrawlLog(format!("malformed HTTP status line: {status_line}"))
        })?;
    // The server replies to `Connection: close` without chunking, so the
    // remainder of the stream is the body (modulo an optional
    // Content-Length we can trust but don't need).
    Ok(HttpResponse { status, body: body.to_owned() })
}

/// What a scripted crawl did: pages fetched and pages skipped because the
/// crawler chose to honor robots.txt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlOutcome {
    pub fetched: Vec<String>,
    pub skipped: Vec<String>,
}

/// Crawler that honors robots.txt: fetch the policy first, parse the
/// groups addressed to it, and skip every disallowed path.
pub fn crawl_compliant(
    addr: &str,
    user_agent: &str,
    paths: &[String],
) -> Result<CrawlOutcome, ServerError> {
    let robots = http_get(addr, "/robots.txt", user_agent)?;
    let rules = if robots.status == 200 {
        disallow_prefixes(&robots.body, user_agent)
    } else {
        Vec::new()
    };
    let mut outcome = CrawlOutcome { fetched: Vec::new(), skipped: Vec::new() };
    for path in paths {
        if rules.iter().any(|prefix| path.starts_with(prefix.as_str())) {
            outcome.skipped.push(path.clone());
        } else {
            http_get(addr, path, user_agent)?;
            outcome.fetched.push(path.clone());
        }
    }
    Ok(outcome)
}

/// Crawler that ignores crawl control entirely: it never requests
/// robots.txt and fetches every path it was pointed at.
pub fn crawl_ignoring(
    addr: &str,
    user_agent: &str,
    paths: &[String],
) -> Result<CrawlOutcome, ServerError> {
    let mut outcome = CrawlOutcome { fetched: Vec::new(), skipped: Vec::new() };
    for path in paths {
        http_get(addr, path, user_agent)?;
        outcome.fetched.push(path.clone());
    }
    Ok(outcome)
}

/// Disallow prefixes that apply to `user_agent`: rules from groups whose
/// product token appears in the agent string (or `*`). Empty `Disallow:`
/// lines mean "allow everything" and contribute no prefix.
fn disallow_prefixes(robots_body: &str, user_agent: &str) -> Vec<String> {
    let ua = user_agent.to_ascii_lowercase();
    let mut prefixes = Vec::new();
    let mut group_applies = false;
    let mut in_group_header = false;
    for line in robots_body.lines() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            in_group_header = false;
            continue;
        }
        let Some((field, value)) = line.split_once(':') else { continue };
        let value = value.trim();
        match field.trim().to_ascii_lowercase().as_str() {
            "user-agent" => {
                let token = value.to_ascii_lowercase();
                let matches = token == "*" || ua.contains(&token);
                if in_group_header {
                    // Consecutive User-agent lines share one rule group.
                    group_applies |= matches;
                } else {
                    group_applies = matches;
                    in_group_header = true;
                }
            }
            "disallow" => {
                in_group_header = false;
                if group_applies && !value.is_empty() {
                    prefixes.push(value.to_owned());
                }
            }
            _ => in_group_header = false,
        }
    }
    prefixes
}
