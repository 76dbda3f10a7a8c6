//! The `concord` binary: concordance analysis between immutable AI diagnostic
//! snapshots and physician-validated reports.
//!
//! Subcommands: `ingest` appends validated cases to a hash-chained ledger,
//! `analyze` computes the concordance metrics and writes the report
//! artifacts, `verify` re-walks a ledger's hash chain, `replay` re-derives
//! every stored final report from its snapshot and action log, and `synth`
//! generates seeded synthetic cohorts.
//!
//! Exit codes: 0 success, 1 configuration or I/O failure, 2 usage error,
//! 3 schema error, 4 invariant violation (including strict-mode warnings),
//! 5 ledger/chain failure, 6 replay mismatch, 7 internal-consistency
//! failure.

mod commands;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub(crate) const EXIT_CONFIG: i32 = 1;
pub(crate) const EXIT_SCHEMA: i32 = 3;
pub(crate) const EXIT_INVARIANT: i32 = 4;
pub(crate) const EXIT_CHAIN: i32 = 5;
pub(crate) const EXIT_REPLAY: i32 = 6;
pub(crate) const EXIT_INTERNAL: i32 = 7;

#[derive(Parser)]
#[command(
    name = "concord",
    version,
    about = "Concordance analysis between AI diagnostic snapshots and physician-validated reports",
    after_help = "Exit codes: 0 success, 1 config/I-O, 2 usage, 3 schema, 4 invariant, \
                  5 ledger/chain, 6 replay, 7 internal consistency."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a case file and append its cases to a hash-chained ledger.
    Ingest {
        /// Case file (JSON array of cases, or one case per line).
        cases: PathBuf,
        /// Ledger file to append to (created if absent).
        #[arg(long)]
        ledger: PathBuf,
        /// Treat warnings as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Analyze a cohort (case file or ledger) and write report artifacts.
    Analyze {
        /// Cohort input: a case file or a ledger, auto-detected.
        input: PathBuf,
        /// Similarity threshold in [0, 1].
        #[arg(long, default_value_t = 0.60)]
        tau: f64,
        /// Similarity algorithm: ratcliff-obershelp or levenshtein-normalized.
        #[arg(long, default_value = "ratcliff-obershelp")]
        algorithm: String,
        /// Confidence level in (0, 1).
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Interval shown in the rendered table: auto, wald, wilson, or
        /// clopper-pearson. `auto` picks the exact interval at boundary
        /// proportions and Wilson otherwise. The JSON summary always
        /// carries all three.
        #[arg(long, default_value = "auto")]
        ci_method: String,
        /// Output directory for the artifacts.
        #[arg(long, default_value = "concord-out")]
        out: PathBuf,
        /// Artifacts to produce (comma-separated): csv, json, tsv, table.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,tsv,table")]
        format: Vec<String>,
        /// Treat warnings as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Re-walk a ledger's hash chain and report the first divergence.
    Verify {
        /// Ledger file.
        ledger: PathBuf,
    },
    /// Replay every stored action log and compare against the stored final
    /// report.
    Replay {
        /// Ledger file or case file.
        input: PathBuf,
    },
    /// Generate a seeded synthetic cohort in the case-file schema.
    Synth {
        /// Output case file.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of cases.
        #[arg(long, default_value_t = 21)]
        cases: u64,
        /// Probability the primary is kept verbatim.
        #[arg(long, default_value_t = 0.6)]
        p_exact: f64,
        /// Probability the primary becomes a lexical variant.
        #[arg(long, default_value_t = 0.15)]
        p_lexical: f64,
        /// Probability the primary swaps with a differential.
        #[arg(long, default_value_t = 0.15)]
        p_reprioritize: f64,
        /// Probability the primary is replaced outright.
        #[arg(long, default_value_t = 0.1)]
        p_replace: f64,
        /// Per-differential removal probability.
        #[arg(long, default_value_t = 0.2)]
        p_remove: f64,
        /// Per-slot addition probability (three draws per case).
        #[arg(long, default_value_t = 0.2)]
        p_add: f64,
        /// Vocabulary file, one label per line (defaults to the built-in
        /// pool).
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

/// A failure with its process exit code.
pub(crate) struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest {
            cases,
            ledger,
            strict,
        } => commands::ingest(&cases, &ledger, strict),
        Command::Analyze {
            input,
            tau,
            algorithm,
            level,
            ci_method,
            out,
            format,
            strict,
        } => commands::analyze(commands::AnalyzeArgs {
            input,
            tau,
            algorithm,
            level,
            ci_method,
            out,
            formats: format,
            strict,
        }),
        Command::Verify { ledger } => commands::verify(&ledger),
        Command::Replay { input } => commands::replay(&input),
        Command::Synth {
            out,
            seed,
            cases,
            p_exact,
            p_lexical,
            p_reprioritize,
            p_replace,
            p_remove,
            p_add,
            vocab,
        } => commands::synth(commands::SynthArgs {
            out,
            seed,
            cases,
            p_exact,
            p_lexical,
            p_reprioritize,
            p_replace,
            p_remove,
            p_add,
            vocab,
        }),
    };

    if let Err(error) = result {
        eprintln!("error: {}", error.message);
        std::process::exit(error.code);
    }
}
