//! Command implementations behind the `arshield` argument surface.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use arshield_core::html::policy::{baseline_notice, default_strict_markers, response_template_for};
use arshield_core::html::{extract_visible, inject, verify_invariance, InvarianceCheck, ViewProfile};
use arshield_core::objective::ObjectiveWeights;
use arshield_core::{
    DefenseGoal, DefensePolicy, InjectionSpec, Position, RawHtml, Stage, Visibility,
};
use arshield_server::{
    generate_corpus, load_corpus, start_server, wait_for_interrupt, write_corpus, RobotsVariant,
    ServerConfig,
};
use arshield_sim::{
    attack_session, build_report, bypass_followups, evaluate_session, load_transcripts, optimize,
    report_from_labeled, single_queries, write_transcripts, AttackTranscript, Attacker,
    AttackerProfile, ChatClient, EvalContext, EvaluationReport, HttpAttacker, IndexEntry,
    LlmRefiner, OptimizeConfig, PolicyRefiner, RateLimiter, ReportRow, ScriptedAttacker,
    SessionEvaluation, SessionKey, SiteIndex,
};

use crate::config::Settings;
use crate::{Command, Format, PolicyArgs, SimArgs};

const DEFAULT_BASE_URL: &str = "https://corpus.example";

/// A flag combination clap cannot reject on its own (wrong companion flags,
/// unknown names). Reported with exit code 2 rather than 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(message: impl Into<String>) -> Result<T> {
    Err(anyhow!(UsageError(message.into())))
}

pub fn execute(command: Command, settings: &Settings, seed: u64) -> Result<()> {
    match command {
        Command::Inject { input, out, policy } => inject_cmd(&input, &out, &policy, settings),
        Command::Verify { before, after } => verify_cmd(&before, &after),
        Command::Attack { corpus, site, out, policy, sim } => {
            attack_cmd(&corpus, &site, out.as_deref(), &policy, &sim, settings, seed)
        }
        Command::Optimize { corpus, sites, budget, target, refiner, out, policy, sim } => {
            optimize_cmd(
                &corpus,
                &sites,
                budget,
                target,
                refiner.as_deref(),
                out.as_deref(),
                &policy,
                &sim,
                settings,
                seed,
            )
        }
        Command::Evaluate { corpus, transcripts, out, format, policy, sim } => evaluate_cmd(
            corpus.as_deref(),
            transcripts.as_deref(),
            out,
            format,
            &policy,
            &sim,
            settings,
            seed,
        ),
        Command::Serve { dir, port, robots, log } => {
            serve_cmd(&dir, port, robots, log, settings)
        }
        Command::Report { input, format } => report_cmd(&input, format),
        Command::Corpus { out, sites } => corpus_cmd(&out, sites, settings, seed),
    }
}

// ---------------------------------------------------------------------------
// Flag resolution

fn build_goal(args: &PolicyArgs, settings: &Settings) -> Result<DefenseGoal> {
    let name = settings.resolve(args.goal.clone(), "goal", "refusal".to_owned())?;
    let redirect_url = settings.resolve_opt(args.redirect_url.clone(), "redirect-url")?;
    match name.as_str() {
        "refusal" => {
            if !args.allowed.is_empty() {
                return usage("--allowed only applies to --goal partial-mask");
            }
            if redirect_url.is_some() {
                return usage("--redirect-url only applies to --goal redirect");
            }
            Ok(DefenseGoal::Refusal)
        }
        "partial-mask" => {
            if redirect_url.is_some() {
                return usage("--redirect-url only applies to --goal redirect");
            }
            if args.allowed.is_empty() {
                return usage("--goal partial-mask needs at least one --allowed fact");
            }
            Ok(DefenseGoal::partial_mask(args.allowed.clone())?)
        }
        "redirect" => {
            if !args.allowed.is_empty() {
                return usage("--allowed only applies to --goal partial-mask");
            }
            match redirect_url {
                Some(url) => Ok(DefenseGoal::redirect(url)?),
                None => usage("--goal redirect needs --redirect-url"),
            }
        }
        other => usage(format!(
            "unknown goal `{other}`; expected refusal, partial-mask, or redirect"
        )),
    }
}

fn injection_spec(args: &PolicyArgs, settings: &Settings) -> Result<InjectionSpec> {
    let position = settings.resolve(args.position, "position", Position::Top)?;
    let visibility = settings.resolve(args.visibility, "visibility", Visibility::HiddenBlock)?;
    Ok(InjectionSpec { position, visibility })
}

fn build_policy(args: &PolicyArgs, settings: &Settings) -> Result<DefensePolicy> {
    let goal = build_goal(args, settings)?;
    let stage = settings.resolve(args.stage, "stage", Stage::Iteration3)?;
    let spec = injection_spec(args, settings)?;
    let notice = args.notice.clone().unwrap_or_else(|| baseline_notice(&goal));
    let template = match stage {
        Stage::Baseline => {
            if args.template.is_some() {
                return usage("--template requires --stage iteration2 or iteration3");
            }
            None
        }
        Stage::Iteration2 | Stage::Iteration3 => {
            Some(args.template.clone().unwrap_or_else(|| response_template_for(&goal)))
        }
    };
    let (repetitions, markers) = match stage {
        Stage::Baseline | Stage::Iteration2 => (1, Vec::new()),
        Stage::Iteration3 => (3, default_strict_markers()),
    };
    Ok(DefensePolicy::new(goal, stage, notice, template, repetitions, markers, spec)?)
}

fn build_weights(sim: &SimArgs, settings: &Settings) -> Result<ObjectiveWeights> {
    let defaults = ObjectiveWeights::default();
    let lambda = settings.resolve(sim.lambda, "lambda", defaults.lambda)?;
    let measure = settings.resolve(sim.measure, "measure", defaults.measure)?;
    Ok(ObjectiveWeights { lambda, measure })
}

fn make_attacker(sim: &SimArgs, settings: &Settings, seed: u64) -> Result<Box<dyn Attacker>> {
    let choice = settings.resolve(sim.attacker.clone(), "attacker", "default".to_owned())?;
    if let Some(rest) = choice.strip_prefix("http:") {
        // `http://host/v1` is itself the base URL; `http:my-proxy/v1` names one.
        let base_url = if rest.starts_with("//") { choice.clone() } else { rest.to_owned() };
        let model = settings.resolve(sim.model.clone(), "model", "gpt-4o".to_owned())?;
        let limiter = Arc::new(RateLimiter::new(4, 2.0));
        let client = ChatClient::from_env(base_url, &model, limiter)?;
        Ok(Box::new(HttpAttacker::new(model, client)))
    } else {
        match AttackerProfile::named(&choice, seed) {
            Some(profile) => Ok(Box::new(ScriptedAttacker::new(profile))),
            None => usage(format!(
                "unknown attacker `{choice}`; expected default, gemini, or http:<base-url>"
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Live simulation shared by `attack` and `evaluate --corpus`

struct LiveOutcome {
    transcripts: Vec<AttackTranscript>,
    sessions: Vec<(SessionKey, SessionEvaluation)>,
    warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_live(
    corpus_dir: &Path,
    targets: &[String],
    policy: &DefensePolicy,
    attacker: &dyn Attacker,
    queries: usize,
    rounds: usize,
    base_url: &str,
    seed: u64,
    weights: &ObjectiveWeights,
) -> Result<LiveOutcome> {
    let (_, fixtures) = load_corpus(corpus_dir)?;
    for id in targets {
        if !fixtures.iter().any(|f| f.manifest.id == *id) {
            bail!("site {id} is not in the corpus at {}", corpus_dir.display());
        }
    }

    // The defense is deployed corpus-wide: every page carries the policy, so
    // retrieval always lands on a protected document.
    let mut warnings = Vec::new();
    let mut injected = Vec::with_capacity(fixtures.len());
    for fixture in &fixtures {
        let outcome = inject(&fixture.html, policy)
            .with_context(|| format!("embedding the policy into {}", fixture.manifest.id))?;
        warnings.extend(outcome.warnings.iter().map(|w| format!("{}: {w}", fixture.manifest.id)));
        injected.push((fixture.manifest.clone(), outcome.page));
    }
    let index = SiteIndex::build(injected);
    let followups = bypass_followups(rounds);

    // Keep each site's seed tied to its corpus position so restricting the
    // target set never changes another site's queries.
    let selected: Vec<(usize, &IndexEntry)> = index
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| targets.is_empty() || targets.contains(&e.manifest.id))
        .collect();

    let per_site: Vec<Vec<(AttackTranscript, SessionEvaluation)>> = selected
        .par_iter()
        .map(|(i, entry)| {
            let site_text = extract_visible(&entry.page, ViewProfile::HumanView);
            let context = EvalContext {
                site: &site_text,
                goal: &policy.goal,
                template: policy.response_template.as_deref(),
                weights,
            };
            let openings =
                single_queries(&entry.manifest, base_url, queries, seed.wrapping_add(*i as u64));
            openings
                .iter()
                .map(|opening| {
                    let transcript = attack_session(
                        attacker,
                        &index,
                        &entry.manifest.id,
                        policy,
                        opening,
                        &followups,
                        weights,
                    )?;
                    let evaluation = evaluate_session(&transcript, Some(&context))?;
                    Ok((transcript, evaluation))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut transcripts = Vec::new();
    let mut sessions = Vec::new();
    for site_sessions in per_site {
        for (transcript, evaluation) in site_sessions {
            sessions.push((SessionKey::of(&transcript), evaluation));
            transcripts.push(transcript);
        }
    }
    Ok(LiveOutcome { transcripts, sessions, warnings })
}

// ---------------------------------------------------------------------------
// Commands

fn inject_cmd(input: &Path, out: &Path, args: &PolicyArgs, settings: &Settings) -> Result<()> {
    let raw = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let page = RawHtml::new(raw)?;
    let policy = build_policy(args, settings)?;
    let outcome = inject(&page, &policy)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    if let InvarianceCheck::Diff { word_offset, .. } = verify_invariance(&page, &outcome.page) {
        bail!(
            "embedding changed the rendered text at word {word_offset}; not writing {}",
            out.display()
        );
    }
    std::fs::write(out, outcome.page.as_str())
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "embedded {} policy ({}, {}/{}) into {}",
        policy.goal.label(),
        policy.stage.name(),
        policy.injection.position.name(),
        policy.injection.visibility.name(),
        out.display()
    );
    Ok(())
}

fn verify_cmd(before: &Path, after: &Path) -> Result<()> {
    let original = RawHtml::new(
        std::fs::read_to_string(before)
            .with_context(|| format!("reading {}", before.display()))?,
    )?;
    let edited = RawHtml::new(
        std::fs::read_to_string(after).with_context(|| format!("reading {}", after.display()))?,
    )?;
    match verify_invariance(&original, &edited) {
        InvarianceCheck::Preserved => {
            println!("INVARIANT OK");
            Ok(())
        }
        InvarianceCheck::Diff { word_offset, before_excerpt, after_excerpt } => bail!(
            "INVARIANT VIOLATED: rendered text diverges at word {word_offset}: \
             {before_excerpt:?} -> {after_excerpt:?}"
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn attack_cmd(
    corpus: &Path,
    site: &str,
    out: Option<&Path>,
    policy_args: &PolicyArgs,
    sim_args: &SimArgs,
    settings: &Settings,
    seed: u64,
) -> Result<()> {
    let policy = build_policy(policy_args, settings)?;
    let attacker = make_attacker(sim_args, settings, seed)?;
    let queries = settings.resolve(sim_args.queries, "queries", 10)?;
    let rounds = settings.resolve(sim_args.rounds, "rounds", 2)?;
    let base_url =
        settings.resolve(sim_args.base_url.clone(), "base-url", DEFAULT_BASE_URL.to_owned())?;
    let weights = build_weights(sim_args, settings)?;

    let outcome = run_live(
        corpus,
        std::slice::from_ref(&site.to_owned()),
        &policy,
        attacker.as_ref(),
        queries,
        rounds,
        &base_url,
        seed,
        &weights,
    )?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(path) = out {
        write_transcripts(path, &outcome.transcripts)?;
        eprintln!("wrote {} transcripts to {}", outcome.transcripts.len(), path.display());
    }
    print!("{}", build_report(&outcome.sessions).to_table());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn optimize_cmd(
    corpus: &Path,
    site_ids: &[String],
    budget: Option<u32>,
    target: Option<f64>,
    refiner_url: Option<&str>,
    out: Option<&Path>,
    policy_args: &PolicyArgs,
    sim_args: &SimArgs,
    settings: &Settings,
    seed: u64,
) -> Result<()> {
    if policy_args.stage.is_some() {
        return usage("--stage is chosen by the optimizer; it always starts at baseline");
    }
    if policy_args.notice.is_some() || policy_args.template.is_some() {
        return usage("--notice and --template are chosen by the optimizer");
    }
    let goal = build_goal(policy_args, settings)?;
    let attacker = make_attacker(sim_args, settings, seed)?;
    let config = OptimizeConfig {
        target_dsr: settings.resolve(target, "target", 0.95)?,
        max_iterations: settings.resolve(budget, "budget", 3)?,
        queries_per_site: settings.resolve(sim_args.queries, "queries", 10)?,
        followup_rounds: settings.resolve(sim_args.rounds, "rounds", 2)?,
        base_url: settings.resolve(
            sim_args.base_url.clone(),
            "base-url",
            DEFAULT_BASE_URL.to_owned(),
        )?,
        seed,
        injection: injection_spec(policy_args, settings)?,
        weights: build_weights(sim_args, settings)?,
    };

    let (_, fixtures) = load_corpus(corpus)?;
    for id in site_ids {
        if !fixtures.iter().any(|f| f.manifest.id == *id) {
            bail!("site {id} is not in the corpus at {}", corpus.display());
        }
    }
    let sites: Vec<_> = fixtures
        .into_iter()
        .filter(|f| site_ids.is_empty() || site_ids.contains(&f.manifest.id))
        .map(|f| (f.manifest, f.html))
        .collect();

    let refiner = match refiner_url {
        Some(url) => {
            let model = settings.resolve(sim_args.model.clone(), "model", "gpt-4o".to_owned())?;
            let limiter = Arc::new(RateLimiter::new(4, 2.0));
            Some(LlmRefiner::new(ChatClient::from_env(url, model, limiter)?))
        }
        None => None,
    };
    let refiner_ref = refiner.as_ref().map(|r| r as &dyn PolicyRefiner);

    let outcome = optimize(&sites, &goal, attacker.as_ref(), refiner_ref, &config)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    for entry in &outcome.history {
        let followup = entry
            .fdsr
            .map(|v| format!(", follow-up success {:.1}%", v * 100.0))
            .unwrap_or_default();
        println!(
            "iteration {} [{}]: session success {:.1}%{}, mean objective {:.4}",
            entry.iteration,
            entry.stage.name(),
            entry.dsr * 100.0,
            followup,
            entry.mean_j,
        );
    }
    println!(
        "{}; best policy: {} at {}/{}",
        if outcome.achieved { "target reached" } else { "target not reached" },
        outcome.best_policy.stage.name(),
        outcome.best_policy.injection.position.name(),
        outcome.best_policy.injection.visibility.name(),
    );
    if let Some(path) = out {
        let doc = serde_json::json!({
            "achieved": outcome.achieved,
            "best_policy": outcome.best_policy,
            "history": outcome.history,
            "warnings": outcome.warnings,
        });
        std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&doc)?))
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote outcome to {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cmd(
    corpus: Option<&Path>,
    transcripts: Option<&Path>,
    out: Option<PathBuf>,
    format: Option<Format>,
    policy_args: &PolicyArgs,
    sim_args: &SimArgs,
    settings: &Settings,
    seed: u64,
) -> Result<()> {
    let report = match (transcripts, corpus) {
        (Some(path), _) => {
            let loaded = load_transcripts(path)?;
            report_from_labeled(&loaded)?
        }
        (None, Some(dir)) => {
            let policy = build_policy(policy_args, settings)?;
            let attacker = make_attacker(sim_args, settings, seed)?;
            let queries = settings.resolve(sim_args.queries, "queries", 10)?;
            let rounds = settings.resolve(sim_args.rounds, "rounds", 2)?;
            let base_url = settings.resolve(
                sim_args.base_url.clone(),
                "base-url",
                DEFAULT_BASE_URL.to_owned(),
            )?;
            let weights = build_weights(sim_args, settings)?;
            let outcome = run_live(
                dir,
                &[],
                &policy,
                attacker.as_ref(),
                queries,
                rounds,
                &base_url,
                seed,
                &weights,
            )?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            build_report(&outcome.sessions)
        }
        (None, None) => unreachable!("clap requires --corpus or --transcripts"),
    };

    let out = out.unwrap_or_else(|| PathBuf::from("report.json"));
    std::fs::write(&out, report.to_json())
        .with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote report ({} rows) to {}", report.rows.len(), out.display());
    print_report(&report, format.unwrap_or(Format::Table));
    Ok(())
}

fn serve_cmd(
    dir: &Path,
    port: Option<u16>,
    robots: Option<String>,
    log: Option<PathBuf>,
    settings: &Settings,
) -> Result<()> {
    let port = settings.resolve(port, "port", 8080)?;
    let robots_name = settings.resolve(robots, "robots", "none".to_owned())?;
    let variant = match robots_name.as_str() {
        "none" => RobotsVariant::None,
        "block-ai" | "block-ai-bots" => RobotsVariant::BlockAiBots,
        other => {
            return usage(format!(
                "unknown robots variant `{other}`; expected none, block-ai, or block-ai-bots"
            ))
        }
    };
    let log = match settings.resolve_opt(log, "log")? {
        Some(path) => path,
        None => PathBuf::from("crawl_log.jsonl"),
    };
    let handle = start_server(ServerConfig::new(dir, port, variant, &log))?;
    println!("serving {} at {}", dir.display(), handle.url());
    println!("robots: {robots_name}; crawl log: {}", handle.log_path().display());
    println!("press Ctrl-C to stop");
    wait_for_interrupt()?;
    handle.shutdown()?;
    println!("stopped");
    Ok(())
}

fn report_cmd(input: &Path, format: Format) -> Result<()> {
    let raw = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let rows: Vec<ReportRow> = serde_json::from_str(&raw)
        .with_context(|| format!("{} is not an evaluation report", input.display()))?;
    print_report(&EvaluationReport { rows }, format);
    Ok(())
}

fn corpus_cmd(out: &Path, sites: Option<usize>, settings: &Settings, seed: u64) -> Result<()> {
    let count = settings.resolve(sites, "sites", 12)?;
    let fixtures = generate_corpus(count, seed)?;
    write_corpus(out, seed, &fixtures)?;
    println!("wrote {count} sites to {} (seed {seed})", out.display());
    Ok(())
}

fn print_report(report: &EvaluationReport, format: Format) {
    match format {
        Format::Json => print!("{}", report.to_json()),
        Format::Csv => print!("{}", report.to_csv()),
        Format::Table => print!("{}", report.to_table()),
    }
}
