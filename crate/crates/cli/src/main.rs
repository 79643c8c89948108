//! `arshield` — embed machine-readable defense policies into web pages,
//! attack the result with retrieval-style agents, and report how often the
//! defense holds.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use arshield_core::{Measure, Position, Stage, Visibility};

use crate::config::{FileConfig, Settings};

/// Seed used when neither the command line nor the config file names one.
const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(
    name = "arshield",
    version,
    about = "Embed anti-retrieval policies into pages and measure whether agents honor them"
)]
struct Cli {
    /// Run configuration file (flat `key = value` lines; flags override it).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed driving every random choice in the run.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags describing the defense policy to embed.
#[derive(Args, Clone, Default)]
struct PolicyArgs {
    /// Defense goal: refusal, partial-mask, or redirect.
    #[arg(long, value_name = "GOAL")]
    goal: Option<String>,

    /// Fact that may still be disclosed under partial-mask (repeatable).
    #[arg(long = "allowed", value_name = "FACT")]
    allowed: Vec<String>,

    /// Canonical URL agents must cite under redirect.
    #[arg(long, value_name = "URL")]
    redirect_url: Option<String>,

    /// Escalation stage: baseline, iteration2, or iteration3.
    #[arg(long, value_name = "STAGE")]
    stage: Option<Stage>,

    /// Placement in the document: top, middle, or bottom.
    #[arg(long, value_name = "POS")]
    position: Option<Position>,

    /// Carrier markup: meta-tag, hidden-block, or transparent-text.
    #[arg(long, value_name = "VIS")]
    visibility: Option<Visibility>,

    /// Override the policy notice paragraph.
    #[arg(long, value_name = "TEXT")]
    notice: Option<String>,

    /// Override the mandated response template (iteration2 and up).
    #[arg(long, value_name = "TEXT")]
    template: Option<String>,
}

/// Flags describing how attack sessions are generated and scored.
#[derive(Args, Clone, Default)]
struct SimArgs {
    /// Attacker: `default`, `gemini`, or `http:<base-url>` for a live API.
    #[arg(long, value_name = "NAME")]
    attacker: Option<String>,

    /// Model name sent to a live `http:` attacker.
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,

    /// Opening queries per site.
    #[arg(long, value_name = "N")]
    queries: Option<usize>,

    /// Bypass follow-up rounds issued after a complied opening.
    #[arg(long, value_name = "R")]
    rounds: Option<usize>,

    /// Base URL substituted into direct queries.
    #[arg(long, value_name = "URL")]
    base_url: Option<String>,

    /// Leakage weight in the attacker objective.
    #[arg(long, value_name = "F")]
    lambda: Option<f64>,

    /// Disclosure measure: token-jaccard, bigram-containment, or lcs-ratio.
    #[arg(long, value_name = "NAME")]
    measure: Option<Measure>,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a defense policy into an HTML page without changing what a
    /// human visitor sees.
    Inject {
        /// Page to protect.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,

        /// Where to write the defended page.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,

        #[command(flatten)]
        policy: PolicyArgs,
    },

    /// Check that a defended page renders exactly like the original.
    Verify {
        /// The original page.
        #[arg(long, value_name = "FILE")]
        before: PathBuf,

        /// The edited page.
        #[arg(long, value_name = "FILE")]
        after: PathBuf,
    },

    /// Run attack sessions against one protected corpus site.
    Attack {
        /// Corpus directory (manifest.json plus site pages).
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,

        /// Site id to target (e.g. s03).
        #[arg(long, value_name = "ID")]
        site: String,

        /// Where to write the session transcripts (JSONL).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,

        #[command(flatten)]
        policy: PolicyArgs,

        #[command(flatten)]
        sim: SimArgs,
    },

    /// Escalate the defense until the attacker stops redistributing.
    Optimize {
        /// Corpus directory.
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,

        /// Restrict to these site ids (repeatable; default: whole corpus).
        #[arg(long = "site", value_name = "ID")]
        sites: Vec<String>,

        /// Iteration budget.
        #[arg(long, value_name = "B")]
        budget: Option<u32>,

        /// Target session success rate in [0, 1].
        #[arg(long, value_name = "D")]
        target: Option<f64>,

        /// Base URL of an LLM proxy that proposes policy rewordings.
        #[arg(long, value_name = "URL")]
        refiner: Option<String>,

        /// Write the outcome (best policy plus history) as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,

        #[command(flatten)]
        policy: PolicyArgs,

        #[command(flatten)]
        sim: SimArgs,
    },

    /// Evaluate the defense across a corpus, or replay labeled transcripts.
    Evaluate {
        /// Corpus directory to attack live.
        #[arg(
            long,
            value_name = "DIR",
            conflicts_with = "transcripts",
            required_unless_present = "transcripts"
        )]
        corpus: Option<PathBuf>,

        /// Labeled transcript JSONL to replay instead of attacking.
        #[arg(long, value_name = "FILE")]
        transcripts: Option<PathBuf>,

        /// Where to write the report JSON (default: report.json).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,

        /// Print the report to stdout in this form (default: table).
        #[arg(long, value_enum, value_name = "FORM")]
        format: Option<Format>,

        #[command(flatten)]
        policy: PolicyArgs,

        #[command(flatten)]
        sim: SimArgs,
    },

    /// Serve a corpus directory over HTTP with per-request crawl logging.
    Serve {
        /// Corpus directory to serve.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,

        /// Port to bind on 127.0.0.1 (0 picks a free port).
        #[arg(long, value_name = "N")]
        port: Option<u16>,

        /// Crawl-control variant: none, block-ai, or block-ai-bots.
        #[arg(long, value_name = "VARIANT")]
        robots: Option<String>,

        /// Where to append the crawl log (JSONL).
        #[arg(long, value_name = "FILE")]
        log: Option<PathBuf>,
    },

    /// Render a saved evaluation report.
    Report {
        /// Report JSON produced by `evaluate`.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,

        /// Output form.
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },

    /// Generate a deterministic fictitious-site corpus.
    Corpus {
        /// Directory to write manifest.json and the site pages into.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,

        /// Number of sites.
        #[arg(long, value_name = "N")]
        sites: Option<usize>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<run::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let settings = Settings::new(file);
    let seed = settings.resolve(cli.seed, "seed", DEFAULT_SEED)?;
    if let Some(jobs) = settings.resolve_opt(cli.jobs, "jobs")? {
        // Ignored if a pool already exists (only possible in-process, e.g. tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    run::execute(cli.command, &settings, seed)
}
