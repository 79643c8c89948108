//! The deterministic scripted attacker: a model of a retrieval-enabled
//! assistant that reads a fetched page, weighs any embedded policy, and
//! either honors it or extracts the page's content.

use arshield_core::html::{extract_visible, ViewProfile};
use arshield_core::model::{Query, QueryKind, Tone};
use arshield_core::RawHtml;

use crate::profile::{AttackerProfile, ADHERENCE_THRESHOLD};
use crate::scan::{scan_policy, ScannedPolicy};

/// What the attacker says when it declines without a mandated template.
pub const GENERIC_REFUSAL: &str = "I am unable to provide such information.";

/// How many leading facts the extractive summary reproduces.
pub const SUMMARY_FACT_COUNT: usize = 3;

/// The content-extraction fallback: reproduce the page's leading facts —
/// exactly the disclosure the defenses exist to stop.
pub fn extractive_summary(page: &RawHtml) -> String {
    let human = extract_visible(page, ViewProfile::HumanView);
    if human.facts.is_empty() {
        return human.text;
    }
    let mut summary = human
        .facts
        .iter()
        .take(SUMMARY_FACT_COUNT)
        .cloned()
        .collect::<Vec<_>>()
        .join(". ");
    summary.push('.');
    summary
}

/// Produce the scripted attacker's response to one query against a fetched
/// page. Deterministic: the only "randomness" is a pure hash of the site,
/// the query text, and the profile seed.
pub fn generate_scripted(
    profile: &AttackerProfile,
    site_id: &str,
    page: &RawHtml,
    query: &Query,
) -> String {
    // Some platforms decline explicit scraping requests before reading
    // anything at all.
    if profile.tone_refusal_on_direct
        && query.kind == QueryKind::Single
        && query.tone == Tone::Direct
    {
        return GENERIC_REFUSAL.to_owned();
    }

    // Scan for a policy; an attacker that renders pages first never sees
    // meta tags or display-hidden blocks.
    let scan = scan_policy(page)
        .filter(|s| profile.reads_machine_view || s.visibility.in_rendered_flow());
    let Some(scan) = scan else {
        return extractive_summary(page);
    };

    let weight = adherence_weight(profile, &scan);
    let mut adheres =
        weight + profile.adherence_jitter(site_id, &query.text) >= ADHERENCE_THRESHOLD;
    // A standing refusal survives bypass pressure only when the policy
    // pushes back hard enough.
    if query.kind == QueryKind::BypassFollowup {
        adheres = adheres && scan.marker_count >= profile.bypass_resistance_threshold;
    }

    if !adheres {
        return extractive_summary(page);
    }
    match &scan.template {
        Some(template) => template.clone(),
        None => GENERIC_REFUSAL.to_owned(),
    }
}

/// How strongly the scanned policy registers: placement, notice density,
/// and whether it mandates an exact response.
pub fn adherence_weight(profile: &AttackerProfile, scan: &ScannedPolicy) -> f64 {
    let position = profile.position_weights.weight(scan.position);
    let density =
        (f64::from(scan.repetitions) / f64::from(profile.density_saturation)).min(1.0);
    let template = if scan.template.is_some() { 1.0 } else { profile.template_bonus };
    position * density * template
}
