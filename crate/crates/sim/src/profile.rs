//! Scripted attacker profiles: deterministic models of how a
//! retrieval-enabled assistant weighs an embedded policy before deciding
//! whether to honor it.

use arshield_core::model::Position;
use serde::{Deserialize, Serialize};

/// A policy is honored when its computed adherence weight plus the
/// per-query jitter reaches this threshold.
pub const ADHERENCE_THRESHOLD: f64 = 0.5;

/// Width of the jitter interval `[0, JITTER_SPAN)` added to the adherence
/// weight. Together with the position weights this calibrates how often
/// weakly-placed policies still get honored.
pub const JITTER_SPAN: f64 = 0.48;

/// How strongly each placement registers with a scripted attacker. Content
/// near the top of the document dominates; material buried at the bottom
/// barely registers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionWeights {
    pub top: f64,
    pub middle: f64,
    pub bottom: f64,
}

impl Default for PositionWeights {
    fn default() -> Self {
        PositionWeights { top: 1.0, middle: 0.2, bottom: 0.08 }
    }
}

impl PositionWeights {
    pub fn weight(&self, position: Position) -> f64 {
        match position {
            Position::Top => self.top,
            Position::Middle => self.middle,
            Position::Bottom => self.bottom,
        }
    }
}

/// Deterministic behavioral profile of a scripted attacker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerProfile {
    /// Name used in transcripts and report columns.
    pub name: String,
    /// How much each policy placement registers.
    pub position_weights: PositionWeights,
    /// Repetitions needed before the notice registers at full strength.
    pub density_saturation: u32,
    /// Residual weight multiplier when the policy mandates no response
    /// template (a bare notice is easy to ignore).
    pub template_bonus: f64,
    /// Minimum number of strict enforcement markers required before the
    /// attacker keeps honoring the policy under bypass follow-ups.
    pub bypass_resistance_threshold: usize,
    /// Refuse round-one queries that outright demand page scraping,
    /// regardless of any policy (models platforms that decline explicit
    /// scraping requests).
    pub tone_refusal_on_direct: bool,
    /// Whether the attacker consumes the full machine-readable document.
    /// When false it only sees text that survives human-oriented rendering
    /// flow — so meta tags and display-hidden blocks go unnoticed, while
    /// transparent text (still in the text flow) is read.
    pub reads_machine_view: bool,
    /// Seed mixed into the per-query adherence jitter.
    pub rng_seed: u64,
}

impl AttackerProfile {
    /// The stock scripted attacker: reads the whole document, never
    /// refuses on tone alone.
    pub fn default_profile(rng_seed: u64) -> Self {
        AttackerProfile {
            name: "default".into(),
            position_weights: PositionWeights::default(),
            density_saturation: 2,
            template_bonus: 0.05,
            bypass_resistance_threshold: 2,
            tone_refusal_on_direct: false,
            reads_machine_view: true,
            rng_seed,
        }
    }

    /// A platform that renders pages before reading them (blind to meta
    /// tags and display-hidden blocks) and declines explicit scraping
    /// requests.
    pub fn gemini_profile(rng_seed: u64) -> Self {
        AttackerProfile {
            name: "gemini".into(),
            tone_refusal_on_direct: true,
            reads_machine_view: false,
            ..AttackerProfile::default_profile(rng_seed)
        }
    }

    /// Named profile lookup for CLI/attacker selection.
    pub fn named(name: &str, rng_seed: u64) -> Option<Self> {
        match name {
            "default" => Some(AttackerProfile::default_profile(rng_seed)),
            "gemini" => Some(AttackerProfile::gemini_profile(rng_seed)),
            _ => None,
        }
    }

    /// Per-(site, query) jitter in `[0, JITTER_SPAN)`. A pure function of
    /// its inputs so reruns under one seed reproduce every decision.
    pub fn adherence_jitter(&self, site_id: &str, query_text: &str) -> f64 {
        let mut hash = fnv1a64_seeded(self.rng_seed);
        hash = fnv1a64_write(hash, site_id.as_bytes());
        hash = fnv1a64_write(hash, &[0xff]);
        hash = fnv1a64_write(hash, query_text.as_bytes());
        // FNV mixes its low bits far better than its high bits on short
        // inputs, while the float conversion keeps only the top 53; run a
        // finalizer so the kept bits are uniform.
        let top53 = mix64(hash) >> 11;
        (top53 as f64 / (1u64 << 53) as f64) * JITTER_SPAN
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64_seeded(seed: u64) -> u64 {
    fnv1a64_write(FNV_OFFSET, &seed.to_le_bytes())
}

fn fnv1a64_write(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 64-bit avalanche finalizer: every input bit flips every output bit with
/// probability near one half.
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}
