//! Blocking client for OpenAI-style chat-completion endpoints, used for
//! live attacker runs, proxy-model policy refinement, and optional
//! response judging. Credentials come exclusively from the environment.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::ratelimit::RateLimiter;

/// Environment variable holding the API key. The key is never accepted
/// via flags or config files.
pub const API_KEY_ENV: &str = "ARSHIELD_API_KEY";

/// One chat message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

/// Client for `{base_url}/v1/chat/completions`.
pub struct ChatClient {
    base_url: String,
    model: String,
    api_key: String,
    http: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
    max_attempts: u32,
    backoff: Duration,
}

impl ChatClient {
    /// Build a client reading the API key from the environment.
    pub fn from_env(
        base_url: impl Into<String>,
        model: impl Into<String>,
        limiter: Arc<RateLimiter>,
    ) -> Result<Self, SimError> {
        let api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(SimError::MissingCredential(API_KEY_ENV))?;
        Ok(Self::with_key(base_url, model, api_key, limiter))
    }

    /// Build a client with an explicit key (tests and embedding callers).
    pub fn with_key(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        limiter: Arc<RateLimiter>,
    ) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("default TLS-less client construction cannot fail");
        ChatClient {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            model: model.into(),
            api_key: api_key.into(),
            http,
            limiter,
            max_attempts: 4,
            backoff: Duration::from_millis(250),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Override retry behavior (primarily for tests).
    pub fn with_retry(mut self, max_attempts: u32, backoff: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.backoff = backoff;
        self
    }

    /// Run one chat completion, retrying transient failures with
    /// exponential backoff. Auth rejections fail immediately; timeouts and
    /// 429/5xx responses retry until attempts run out.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, SimError> {
        let url = format!("{}/v1/chat/completions", self.base_url);
        let request = CompletionRequest { model: &self.model, messages, temperature: 0.0 };
        let mut last_reason = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            self.limiter.acquire();
            let response = self
                .http
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&request)
                .send();
            match response {
                Err(e) => {
                    last_reason = if e.is_timeout() {
                        format!("timeout: {e}")
                    } else {
                        format!("transport: {e}")
                    };
                }
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        let body = resp.text().unwrap_or_default();
                        return Err(SimError::AuthRejected(format!("{status}: {body}")));
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_reason = format!("status {status}");
                        continue;
                    }
                    let body = resp.text().unwrap_or_default();
                    if !status.is_success() {
                        return Err(SimError::MalformedResponse(format!(
                            "unexpected status {status}: {body}"
                        )));
                    }
                    return parse_completion(&body);
                }
            }
        }
        Err(SimError::Exhausted { attempts: self.max_attempts, reason: last_reason })
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: Option<String>,
}

/// Extract `choices[0].message.content` from a completion response body.
pub fn parse_completion(body: &str) -> Result<String, SimError> {
    let parsed: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| SimError::MalformedResponse(format!("{e}; body: {}", truncate(body, 200))))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| SimError::MalformedResponse("response carried no choices".into()))?;
    choice
        .message
        .content
        .filter(|c| !c.is_empty())
        .ok_or_else(|| SimError::MalformedResponse("choice carried no message content".into()))
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}
