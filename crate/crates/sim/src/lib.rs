//! The adversarial harness: retrieval over a site corpus, scripted and live
//! HTTP attackers, multi-round attack sessions, verdict evaluation with
//! DSR/FDSR rates, deterministic reports, and the closed-loop policy
//! optimizer.

pub mod error;
pub mod evaluator;
pub mod http_llm;
pub mod index;
pub mod optimizer;
pub mod profile;
pub mod querygen;
pub mod ratelimit;
pub mod report;
pub mod scan;
pub mod scripted;
pub mod session;

pub use error::SimError;
pub use evaluator::{
    classify, dsr, evaluate_all, evaluate_session, fdsr, is_template_echo, parse_label,
    session_dsr, EvalContext, Reason, RoundVerdict, SessionEvaluation, Verdict,
    DISCLOSURE_THRESHOLD,
};
pub use http_llm::{ChatClient, ChatMessage, API_KEY_ENV};
pub use index::{index_keywords, IndexEntry, SiteIndex, DEFAULT_OVERLAP_THRESHOLD};
pub use optimizer::{
    candidate_from_proposal, escalate, optimize, parse_proposal, refine_with_proxy, seed_policy,
    HistoryEntry, LlmRefiner, OptimizationOutcome, OptimizeConfig, PolicyProposal, PolicyRefiner,
};
pub use profile::{AttackerProfile, PositionWeights};
pub use querygen::{
    bypass_followups, load_query_pool, single_queries, worst_case_query, write_query_pool,
};
pub use ratelimit::RateLimiter;
pub use report::{build_report, report_from_labeled, EvaluationReport, ReportRow, SessionKey};
pub use scan::{scan_policy, ScannedPolicy, ScannedVisibility};
pub use scripted::{extractive_summary, generate_scripted, GENERIC_REFUSAL};
pub use session::{
    attack_session, load_transcripts, write_transcripts, AttackTranscript, Attacker, HttpAttacker,
    RoundRecord, ScriptedAttacker,
};
