//! `semcom`: query, measure and select over probabilistic knowledge bases, check semantic
//! security, run communication and data-aided sensing simulations, and compute entropies.
//!
//! Exit status is 0 on success, 1 when the inputs are well-formed on the command line but the
//! computation fails (unreadable file, parse error, budget exceeded, ...), 2 on usage errors.

mod commands;
mod input;
mod render;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semcom::kb::Policy;
use semcom::metrics::EntropyConfig;
use semcom::security::SecurityParams;

use render::Format;

pub enum Failure {
    Usage(String),
    Domain(String),
}

#[derive(Parser)]
#[command(name = "semcom", version, about = "Semantic communication over probabilistic knowledge bases")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Worker threads for parallel scoring and enumeration.
    #[arg(long, global = true, env = "SEMCOM_JOBS", value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    jobs: Option<usize>,
    /// Probability assumed for a query that matches no head.
    #[arg(long, global = true, default_value_t = 0.5, value_parser = probability)]
    default_prob: f64,
    #[command(subcommand)]
    command: Command,
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1]"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Probability that a knowledge base entails a ground atom.
    Query { kb: PathBuf, atom: String },
    /// Average uncertainty of a knowledge base, or the semantic content of candidate messages.
    Measure {
        kb: PathBuf,
        /// Clause file of candidate messages; prints U(K ⊕ m) - U(K) for each.
        #[arg(long)]
        content: Option<PathBuf>,
        #[arg(long, default_value_t = Policy::Union)]
        policy: Policy,
    },
    /// Rank a pool of messages for a receiver.
    Select {
        /// The receiver's knowledge base, known exactly.
        #[arg(long, conflicts_with = "belief", required_unless_present = "belief")]
        kb: Option<PathBuf>,
        /// JSON belief over the receiver's knowledge base.
        #[arg(long)]
        belief: Option<PathBuf>,
        #[arg(long)]
        pool: PathBuf,
        /// Minimize the entropy of this query instead of the average uncertainty.
        #[arg(long)]
        query: Option<String>,
        /// Only consider messages of at most this many bits.
        #[arg(long, requires = "query")]
        lmax: Option<f64>,
        #[arg(long, default_value_t = Policy::Union)]
        policy: Policy,
    },
    /// Check whether a message is opaque to an eavesdropper and useful to the receiver.
    Secure {
        eve: PathBuf,
        bob: PathBuf,
        /// The message clause, e.g. "0.9::pass_score(70)."
        message: String,
        #[arg(required = true)]
        queries: Vec<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        margin: f64,
        #[arg(long, default_value_t = Policy::Union)]
        policy: Policy,
    },
    /// Run a scenario and write the per-round trace as CSV.
    Simulate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = SimKind::Session)]
        kind: SimKind,
        /// Trace CSV destination; with --format csv the trace also goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Entropies, mutual information and rates of a joint distribution.
    Info(InfoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Session,
    Das,
    SemanticDas,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InfoOp {
    Entropy,
    Cond,
    CondEvent,
    Mi,
    Sw,
    Capacity,
}

#[derive(Args)]
pub struct InfoArgs {
    /// JSON joint distribution (not needed for capacity).
    joint: Option<PathBuf>,
    #[arg(long, value_enum)]
    op: InfoOp,
    /// Variables for entropy; all by default.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    target: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    given: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    y: Vec<String>,
    /// Event condition such as "Y<=75"; repeat or join with && for a conjunction.
    #[arg(long)]
    pred: Vec<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also print the chain-rule decomposition of the entropy.
    #[arg(long)]
    chain_rule: bool,
}

fn run(cli: Cli) -> Result<String, Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Domain(e.to_string()))?;
    }
    let cfg = EntropyConfig::with_unmatched(cli.default_prob).map_err(|e| Failure::Usage(e.to_string()))?;
    let rendered = match cli.command {
        Command::Query { kb, atom } => commands::query(&kb, &atom, &cfg)?,
        Command::Measure { kb, content, policy } => commands::measure(&kb, content.as_deref(), policy, &cfg)?,
        Command::Select { kb, belief, pool, query, lmax, policy } => {
            let args = commands::SelectArgs { kb: kb.as_deref(), belief: belief.as_deref(), pool: &pool, query: query.as_deref(), lmax, policy };
            commands::select(args, &cfg)?
        }
        Command::Secure { eve, bob, message, queries, tol, margin, policy } => {
            commands::secure(&eve, &bob, &message, &queries, &SecurityParams { tol, margin, policy }, &cfg)?
        }
        Command::Simulate { scenario, kind, out, seed } => {
            let sim = commands::simulate(&scenario, kind, seed, &cfg)?;
            if let Some(out) = out {
                fs::write(&out, &sim.trace_csv).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", out.display())))?;
            }
            if cli.format == Format::Csv {
                return Ok(sim.trace_csv);
            }
            sim.summary
        }
        Command::Info(args) => commands::info(&args)?,
    };
    Ok(rendered.emit(cli.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("semcom: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("semcom: error: {msg}");
            ExitCode::from(1)
        }
    }
}
