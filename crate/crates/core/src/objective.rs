//! The disclosure objective: how well an attacker response defeats a
//! defense goal. Lower values favor the defense, higher values the attacker,
//! so defenses minimize what attackers maximize.

use serde::{Deserialize, Serialize};

use crate::model::{DefenseGoal, ObjectiveScore};
use crate::similarity::{similarity, Measure};
use crate::text::{normalize, RenderedText};

/// Objective weights: `lambda` scales the leakage penalty, `measure` picks
/// the disclosure similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda: f64,
    pub measure: Measure,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { lambda: 1.0, measure: Measure::TokenJaccard }
    }
}

/// Fraction of protected facts that `response` reveals. A fact is protected
/// when it is in `site.facts` but not in `allowed` (compared normalized), and
/// revealed when its normalized text occurs as a substring of the normalized
/// response. Zero when nothing is protected.
pub fn leakage(response: &str, site: &RenderedText, allowed: &[String]) -> f64 {
    let allowed: Vec<String> = allowed.iter().map(|f| normalize(f)).collect();
    let protected: Vec<&String> = site
        .facts
        .iter()
        .filter(|fact| !allowed.iter().any(|a| a == *fact))
        .collect();
    if protected.is_empty() {
        return 0.0;
    }
    let response = normalize(response);
    let revealed = protected.iter().filter(|fact| response.contains(fact.as_str())).count();
    revealed as f64 / protected.len() as f64
}

/// Score `response` against `site` under `goal`.
///
/// - Refusal: the objective is the disclosure similarity itself — any
///   resemblance to the page is a win for the attacker.
/// - Partial mask: `-subset_coverage + lambda * leakage` — covering the
///   allowed subset helps the defense, revealing protected facts hurts it.
/// - Redirect: `-(1 if the redirect URL appears) + lambda * leakage`.
pub fn score(
    response: &str,
    site: &RenderedText,
    goal: &DefenseGoal,
    weights: &ObjectiveWeights,
) -> ObjectiveScore {
    let disclosure = similarity(response, &site.text, weights.measure);
    match goal {
        DefenseGoal::Refusal => {
            let leak = leakage(response, site, &[]);
            ObjectiveScore {
                j_value: disclosure,
                disclosure,
                subset_coverage: 0.0,
                leakage: leak,
                redirect_hit: false,
            }
        }
        DefenseGoal::PartialMask { allowed } => {
            let subset_text = allowed.join(". ");
            let subset_coverage = similarity(response, &subset_text, weights.measure);
            let leak = leakage(response, site, allowed);
            ObjectiveScore {
                j_value: -subset_coverage + weights.lambda * leak,
                disclosure,
                subset_coverage,
                leakage: leak,
                redirect_hit: false,
            }
        }
        DefenseGoal::Redirect { url } => {
            let redirect_hit = normalize(response).contains(url.as_str());
            let leak = leakage(response, site, &[]);
            ObjectiveScore {
                j_value: -f64::from(u8::from(redirect_hit)) + weights.lambda * leak,
                disclosure,
                subset_coverage: 0.0,
                leakage: leak,
                redirect_hit,
            }
        }
    }
}
