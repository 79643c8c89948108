//! Closed-loop policy optimization: inject the current policy into every
//! site, attack the corpus, measure session-level compliance, and escalate
//! (or let a refiner propose) until the target rate is hit.

use serde::{Deserialize, Serialize};

use arshield_core::html::policy::{
    baseline_notice, default_strict_markers, policy_text, response_template_for,
};
use arshield_core::html::{extract_visible, inject, verify_invariance, ViewProfile};
use arshield_core::manifest::SiteManifest;
use arshield_core::model::{DefenseGoal, DefensePolicy, InjectionSpec, Stage};
use arshield_core::objective::{score, ObjectiveWeights};
use arshield_core::RawHtml;

use crate::error::SimError;
use crate::evaluator::{evaluate_session, fdsr, session_dsr, EvalContext, Verdict};
use crate::http_llm::{ChatClient, ChatMessage};
use crate::index::SiteIndex;
use crate::querygen::{bypass_followups, single_queries};
use crate::session::{attack_session, Attacker};

/// Optimization loop parameters.
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    /// Session-level success rate that counts as converged.
    pub target_dsr: f64,
    pub max_iterations: u32,
    pub queries_per_site: usize,
    /// Bypass rounds appended after a complied opening.
    pub followup_rounds: usize,
    /// Base URL substituted into direct queries.
    pub base_url: String,
    pub seed: u64,
    pub injection: InjectionSpec,
    pub weights: ObjectiveWeights,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            target_dsr: 0.95,
            max_iterations: 3,
            queries_per_site: 10,
            followup_rounds: 2,
            base_url: "https://corpus.example".into(),
            seed: 7,
            injection: InjectionSpec::default(),
            weights: ObjectiveWeights::default(),
        }
    }
}

/// The ladder's first rung: a plain notice, nothing mandated.
pub fn seed_policy(goal: DefenseGoal, injection: InjectionSpec) -> DefensePolicy {
    let notice = baseline_notice(&goal);
    DefensePolicy::new(goal, Stage::Baseline, notice, None, 1, Vec::new(), injection)
        .expect("baseline policy always satisfies its own invariants")
}

/// Climb one rung: baseline gains the mandated template; iteration2 gains
/// repetition and strict enforcement markers. Errors at the top.
pub fn escalate(policy: &DefensePolicy) -> Result<DefensePolicy, SimError> {
    let stage = policy.stage.next().ok_or_else(|| {
        SimError::Optimization("escalation ladder exhausted at its strictest stage".into())
    })?;
    let template = policy
        .response_template
        .clone()
        .unwrap_or_else(|| response_template_for(&policy.goal));
    let (repetition, markers) = match stage {
        Stage::Baseline => unreachable!("nothing escalates down to baseline"),
        Stage::Iteration2 => (1, Vec::new()),
        Stage::Iteration3 => (policy.repetition_count.max(3), default_strict_markers()),
    };
    DefensePolicy::new(
        policy.goal.clone(),
        stage,
        policy.notice_text.clone(),
        Some(template),
        repetition,
        markers,
        policy.injection,
    )
    .map_err(|e| SimError::Optimization(format!("escalated policy was invalid: {e}")))
}

/// Sentinels and field prefixes for refiner proposals.
pub const PROPOSAL_BEGIN: &str = "BEGIN_POLICY";
pub const PROPOSAL_END: &str = "END_POLICY";
const TEMPLATE_PREFIX: &str = "TEMPLATE:";
const MARKER_PREFIX: &str = "MARKER:";

/// A parsed refiner proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyProposal {
    pub notice: String,
    pub template: Option<String>,
    pub markers: Vec<String>,
}

/// Parse a proposal from refiner output. The policy body sits between
/// `BEGIN_POLICY` and `END_POLICY` lines; inside it, `TEMPLATE:` sets the
/// mandated response, `MARKER:` lines add enforcement statements, and all
/// remaining non-empty lines join into the notice paragraph.
pub fn parse_proposal(text: &str) -> Result<PolicyProposal, SimError> {
    let mut inside = false;
    let mut saw_block = false;
    let mut notice_lines: Vec<&str> = Vec::new();
    let mut template = None;
    let mut markers = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line == PROPOSAL_BEGIN {
            inside = true;
            saw_block = true;
            continue;
        }
        if line == PROPOSAL_END {
            inside = false;
            continue;
        }
        if !inside || line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(TEMPLATE_PREFIX) {
            template = Some(rest.trim().to_owned());
        } else if let Some(rest) = line.strip_prefix(MARKER_PREFIX) {
            markers.push(rest.trim().to_owned());
        } else {
            notice_lines.push(line);
        }
    }
    if !saw_block {
        return Err(SimError::Optimization(format!(
            "proposal lacks a {PROPOSAL_BEGIN}/{PROPOSAL_END} block"
        )));
    }
    let notice = notice_lines.join(" ");
    if notice.trim().is_empty() {
        return Err(SimError::Optimization("proposal carries an empty notice".into()));
    }
    if template.as_deref().is_some_and(|t| t.trim().is_empty()) {
        return Err(SimError::Optimization("proposal template is empty".into()));
    }
    Ok(PolicyProposal { notice, template, markers })
}

/// Anything that can suggest the next policy's wording.
pub trait PolicyRefiner: Sync {
    /// Produce a proposal (see [`parse_proposal`] for the format) given the
    /// current policy and an evaluation summary.
    fn propose(&self, current: &DefensePolicy, feedback: &str) -> Result<String, SimError>;
}

/// A refiner backed by a chat-completion endpoint.
pub struct LlmRefiner {
    client: ChatClient,
}

impl LlmRefiner {
    pub fn new(client: ChatClient) -> Self {
        LlmRefiner { client }
    }
}

impl PolicyRefiner for LlmRefiner {
    fn propose(&self, current: &DefensePolicy, feedback: &str) -> Result<String, SimError> {
        let system = format!(
            "You harden usage policies that site owners embed invisibly in their pages to \
             keep retrieval-enabled assistants from redistributing the content. Reply with \
             exactly one block delimited by {PROPOSAL_BEGIN} and {PROPOSAL_END} lines. Inside \
             it, write the notice paragraph, optionally one '{TEMPLATE_PREFIX} <exact mandated \
             response>' line, and optionally '{MARKER_PREFIX} <enforcement statement>' lines."
        );
        let user = format!(
            "Current policy (stage {}):\n{}\n\nEvaluation feedback:\n{}\n\nPropose a stricter \
             revision.",
            current.stage,
            policy_text(current),
            feedback
        );
        self.client
            .complete(&[ChatMessage::system(system), ChatMessage::user(user)])
    }
}

/// Turn a proposal into a validated policy on the next rung. Missing pieces
/// are backfilled from the current policy or the stock defaults.
pub fn candidate_from_proposal(
    current: &DefensePolicy,
    proposal: &PolicyProposal,
) -> Result<DefensePolicy, SimError> {
    let stage = current.stage.next().ok_or_else(|| {
        SimError::Optimization("escalation ladder exhausted at its strictest stage".into())
    })?;
    let template = proposal
        .template
        .clone()
        .or_else(|| current.response_template.clone())
        .unwrap_or_else(|| response_template_for(&current.goal));
    let (repetition, markers) = match stage {
        Stage::Baseline => unreachable!("nothing escalates down to baseline"),
        Stage::Iteration2 => (1, proposal.markers.clone()),
        Stage::Iteration3 => {
            let markers = if proposal.markers.is_empty() {
                default_strict_markers()
            } else {
                proposal.markers.clone()
            };
            (current.repetition_count.max(3), markers)
        }
    };
    DefensePolicy::new(
        current.goal.clone(),
        stage,
        proposal.notice.clone(),
        Some(template),
        repetition,
        markers,
        current.injection,
    )
    .map_err(|e| SimError::Optimization(format!("proposed policy was invalid: {e}")))
}

/// Ask the refiner for the next policy, but never trust it blindly: the
/// candidate must parse, validate, and preserve the human-visible rendering
/// of a sample page. Any failure falls back to the stock escalation and is
/// recorded as a warning.
pub fn refine_with_proxy(
    refiner: &dyn PolicyRefiner,
    current: &DefensePolicy,
    feedback: &str,
    sample_page: &RawHtml,
) -> Result<(DefensePolicy, Vec<String>), SimError> {
    let mut warnings = Vec::new();
    let candidate = refiner
        .propose(current, feedback)
        .and_then(|text| parse_proposal(&text))
        .and_then(|proposal| candidate_from_proposal(current, &proposal))
        .and_then(|candidate| {
            let outcome = inject(sample_page, &candidate)
                .map_err(|e| SimError::Optimization(format!("candidate failed to embed: {e}")))?;
            if verify_invariance(sample_page, &outcome.page).is_preserved() {
                Ok(candidate)
            } else {
                Err(SimError::Optimization(
                    "candidate changed the human-visible rendering".into(),
                ))
            }
        });
    match candidate {
        Ok(candidate) => Ok((candidate, warnings)),
        Err(e) => {
            warnings.push(format!("refiner proposal rejected ({e}); escalating instead"));
            let fallback = escalate(current)?;
            Ok((fallback, warnings))
        }
    }
}

/// One iteration's measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: u32,
    pub stage: Stage,
    /// Session-level success: fully-complied sessions over retrieved ones.
    pub dsr: f64,
    /// Follow-up rate when multi-round sessions exist.
    pub fdsr: Option<f64>,
    /// Mean attacker objective over every recorded response (lower favors
    /// the defense).
    pub mean_j: f64,
    /// The policy text this iteration shipped.
    pub policy_text: String,
}

/// What the loop produced.
#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub best_policy: DefensePolicy,
    pub history: Vec<HistoryEntry>,
    /// Whether the target rate was reached.
    pub achieved: bool,
    pub warnings: Vec<String>,
}

/// Run the loop over a corpus. Every site must be retrievable by at least
/// one of its opening queries before any policy work starts; the loop then
/// injects, attacks with `queries_per_site` sessions per site (each opening
/// followed by bypass rounds while compliance holds), and keeps the best
/// policy by success rate, breaking ties toward lower mean objective.
pub fn optimize(
    sites: &[(SiteManifest, RawHtml)],
    goal: &DefenseGoal,
    attacker: &dyn Attacker,
    refiner: Option<&dyn PolicyRefiner>,
    config: &OptimizeConfig,
) -> Result<OptimizationOutcome, SimError> {
    if sites.is_empty() {
        return Err(SimError::Optimization("optimization needs at least one site".into()));
    }
    if config.max_iterations == 0 {
        return Err(SimError::Optimization("optimization needs at least one iteration".into()));
    }

    let openings: Vec<Vec<arshield_core::model::Query>> = sites
        .iter()
        .enumerate()
        .map(|(i, (manifest, _))| {
            single_queries(
                manifest,
                &config.base_url,
                config.queries_per_site,
                config.seed.wrapping_add(i as u64),
            )
        })
        .collect();
    let followups = bypass_followups(config.followup_rounds);

    // Retrievability precheck on the clean corpus: a site no opening query
    // can surface would silently contribute nothing but inconclusives.
    let clean_index = SiteIndex::build(sites.to_vec());
    for ((manifest, _), queries) in sites.iter().zip(&openings) {
        let reachable = queries.iter().any(|q| {
            clean_index
                .retrieve(&q.text)
                .is_some_and(|entry| entry.manifest.id == manifest.id)
        });
        if !reachable {
            return Err(SimError::Retrieval(format!(
                "site {} is never retrieved by any of its opening queries",
                manifest.id
            )));
        }
    }

    let mut policy = seed_policy(goal.clone(), config.injection);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut best: Option<(DefensePolicy, f64, f64)> = None;
    let mut achieved = false;

    for iteration in 1..=config.max_iterations {
        // Fresh index with this iteration's policy embedded everywhere.
        let mut index = clean_index.clone();
        let mut site_texts = Vec::with_capacity(sites.len());
        for (manifest, page) in sites {
            let outcome = inject(page, &policy)
                .map_err(|e| SimError::Optimization(format!("injection failed: {e}")))?;
            site_texts.push(extract_visible(&outcome.page, ViewProfile::HumanView));
            index.set_page(&manifest.id, outcome.page);
        }

        let mut evaluations = Vec::new();
        let mut j_sum = 0.0;
        let mut j_count = 0usize;
        let mut failing: Vec<String> = Vec::new();
        let template = policy.response_template.as_deref();
        for (site_idx, (manifest, _)) in sites.iter().enumerate() {
            let site_text = &site_texts[site_idx];
            let ctx = EvalContext {
                site: site_text,
                goal,
                template,
                weights: &config.weights,
            };
            for opening in &openings[site_idx] {
                let transcript = attack_session(
                    attacker,
                    &index,
                    &manifest.id,
                    &policy,
                    opening,
                    &followups,
                    &config.weights,
                )?;
                let evaluation = evaluate_session(&transcript, Some(&ctx))?;
                for (round, verdict) in transcript.rounds.iter().zip(&evaluation.rounds) {
                    j_sum += score(&round.response, site_text, goal, &config.weights).j_value;
                    j_count += 1;
                    if verdict.verdict == Verdict::Violated && failing.len() < 3 {
                        let mut excerpt = round.response.clone();
                        excerpt.truncate(200);
                        failing.push(excerpt);
                    }
                }
                evaluations.push(evaluation);
            }
        }

        let dsr = session_dsr(&evaluations)?;
        let fdsr = fdsr(&evaluations).ok();
        let mean_j = if j_count == 0 { 0.0 } else { j_sum / j_count as f64 };
        history.push(HistoryEntry {
            iteration,
            stage: policy.stage,
            dsr,
            fdsr,
            mean_j,
            policy_text: policy_text(&policy),
        });

        let improves = match &best {
            None => true,
            Some((_, best_dsr, best_j)) => {
                dsr > best_dsr + 1e-12 || ((dsr - best_dsr).abs() <= 1e-12 && mean_j < best_j - 1e-12)
            }
        };
        if improves {
            best = Some((policy.clone(), dsr, mean_j));
        }

        if dsr >= config.target_dsr {
            achieved = true;
            break;
        }
        if iteration == config.max_iterations {
            break;
        }
        if policy.stage.next().is_none() {
            warnings.push(format!(
                "stopping early: the ladder is exhausted at {} with the target unmet",
                policy.stage
            ));
            break;
        }

        let feedback = format!(
            "stage {} scored a session success rate of {:.3} (follow-up rate {}); \
             sample failing responses: {}",
            policy.stage,
            dsr,
            fdsr.map_or_else(|| "n/a".into(), |v| format!("{v:.3}")),
            if failing.is_empty() { "none".into() } else { failing.join(" | ") }
        );
        policy = match refiner {
            Some(refiner) => {
                let (next, mut new_warnings) =
                    refine_with_proxy(refiner, &policy, &feedback, &sites[0].1)?;
                warnings.append(&mut new_warnings);
                next
            }
            None => escalate(&policy)?,
        };
    }

    let (best_policy, best_dsr, _) = best.expect("at least one iteration ran");
    Ok(OptimizationOutcome {
        best_policy,
        history,
        achieved: achieved || best_dsr >= config.target_dsr,
        warnings,
    })
}
