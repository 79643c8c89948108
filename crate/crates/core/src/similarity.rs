//! Text similarity measures used to score how much of a page a response
//! discloses. All measures are token-based, return values in [0, 1], and
//! score identical non-empty texts as 1.0.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::text::tokenize;

/// Similarity measure identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// Jaccard index over token sets (symmetric). The default.
    #[default]
    TokenJaccard,
    /// Fraction of the first text's token bigrams contained in the second.
    BigramContainment,
    /// Longest common token subsequence, scaled by the longer text.
    LcsRatio,
}

impl Measure {
    pub const ALL: [Measure; 3] = [
        Measure::TokenJaccard,
        Measure::BigramContainment,
        Measure::LcsRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::TokenJaccard => "token-jaccard",
            Measure::BigramContainment => "bigram-containment",
            Measure::LcsRatio => "lcs-ratio",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token-jaccard" => Ok(Measure::TokenJaccard),
            "bigram-containment" => Ok(Measure::BigramContainment),
            "lcs-ratio" => Ok(Measure::LcsRatio),
            other => Err(CoreError::unknown(
                "similarity measure",
                other,
                "token-jaccard, bigram-containment, lcs-ratio",
            )),
        }
    }
}

/// Similarity of `a` to `b` under `measure`, in [0, 1].
///
/// Empty-text convention for every measure: two empty texts score 1.0
/// (trivially identical); an empty text against a non-empty one scores 0.0.
pub fn similarity(a: &str, b: &str, measure: Measure) -> f64 {
    let ta = tokenize(a);
    let tb = tokenize(b);
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    match measure {
        Measure::TokenJaccard => jaccard(&ta, &tb),
        Measure::BigramContainment => bigram_containment(&ta, &tb),
        Measure::LcsRatio => lcs_ratio(&ta, &tb),
    }
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let intersection = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    intersection as f64 / union as f64
}

/// Token bigrams of `tokens`; falls back to unigrams for single-token texts
/// so that short texts still compare meaningfully.
fn grams(tokens: &[String]) -> BTreeSet<(&str, &str)> {
    if tokens.len() < 2 {
        return tokens.iter().map(|t| (t.as_str(), "")).collect();
    }
    tokens
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect()
}

fn bigram_containment(a: &[String], b: &[String]) -> f64 {
    let ga = grams(a);
    let gb = grams(b);
    let hit = ga.iter().filter(|g| gb.contains(*g)).count();
    hit as f64 / ga.len() as f64
}

fn lcs_ratio(a: &[String], b: &[String]) -> f64 {
    let longest = a.len().max(b.len());
    lcs_len(a, b) as f64 / longest as f64
}

/// Longest common subsequence length via two-row dynamic programming.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}
