//! Text canonicalization shared by every component that compares page text:
//! Unicode NFC, whitespace collapsing, tokenization, and sentence-level fact
//! segmentation.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Canonicalize a string for comparison: Unicode NFC, every run of
/// whitespace collapsed to a single space, leading/trailing whitespace
/// trimmed. Idempotent.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.nfc() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// Lowercased alphanumeric tokens. Every non-alphanumeric character is a
/// separator; empty fragments are dropped.
pub fn tokenize(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Minimum token count for a sentence to qualify as a fact.
pub const MIN_FACT_TOKENS: usize = 3;

/// Split normalized text into sentences on terminal punctuation (`.`, `!`,
/// `?`). A trailing fragment without a terminator is treated as a sentence
/// too. Sentences shorter than [`MIN_FACT_TOKENS`] tokens are dropped; the
/// terminator itself is not part of the stored fact.
pub fn fact_sentences(normalized: &str) -> Vec<String> {
    let mut facts = Vec::new();
    let mut current = String::new();
    for ch in normalized.chars() {
        if matches!(ch, '.' | '!' | '?') {
            push_fact(&mut facts, &current);
            current.clear();
        } else {
            current.push(ch);
        }
    }
    push_fact(&mut facts, &current);
    facts
}

fn push_fact(facts: &mut Vec<String>, fragment: &str) {
    let fragment = fragment.trim();
    if !fragment.is_empty() && tokenize(fragment).len() >= MIN_FACT_TOKENS {
        facts.push(fragment.to_owned());
    }
}

/// What a reader (or a parser) actually gets out of a page: the normalized
/// text plus its sentence-level facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedText {
    /// Normalized page text (see [`normalize`]).
    pub text: String,
    /// Sentence-level facts of `text` (see [`fact_sentences`]).
    pub facts: Vec<String>,
}

impl RenderedText {
    /// Build from raw extracted text; normalizes and segments facts.
    pub fn from_raw(raw: &str) -> Self {
        let text = normalize(raw);
        let facts = fact_sentences(&text);
        RenderedText { text, facts }
    }

    /// True when no visible text was extracted at all.
    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}
