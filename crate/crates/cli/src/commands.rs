//! Subcommand implementations and error-to-exit-code mapping.

use std::path::{Path, PathBuf};

use concord_core::concordance::analyze_cohort;
use concord_core::export::{diff_tsv, per_case_csv, render_table, summary_json, Provenance};
use concord_core::ledger::{verify_chain, Ledger, LedgerError};
use concord_core::similarity::{SimilarityAlgorithm, SimilarityConfig};
use concord_core::stats::{check_monotonicity, cohort_metrics, CiMethod, StatsError};
use concord_core::store::{
    case_payloads, load_cohort, parse_case_file, raw_from_case, replay_cohort, validate_cases,
    write_case_file, LoadedCohort, StoreError, Warning,
};
use concord_core::synth::{generate_cohort, PerturbationConfig, SynthError};

use crate::{
    CliError, EXIT_CHAIN, EXIT_CONFIG, EXIT_INTERNAL, EXIT_INVARIANT, EXIT_REPLAY, EXIT_SCHEMA,
};

impl From<StoreError> for CliError {
    fn from(error: StoreError) -> Self {
        let code = match &error {
            StoreError::Schema { .. } => EXIT_SCHEMA,
            StoreError::Invariant { .. } => EXIT_INVARIANT,
            StoreError::ReplayMismatch { .. } => EXIT_REPLAY,
            StoreError::Ledger(ledger) => ledger_code(ledger),
            StoreError::Canonical(_) | StoreError::Io(_) => EXIT_CONFIG,
        };
        CliError::new(code, error.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(error: LedgerError) -> Self {
        CliError::new(ledger_code(&error), error.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(error: StatsError) -> Self {
        CliError::new(EXIT_CONFIG, error.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(error: SynthError) -> Self {
        CliError::new(EXIT_CONFIG, error.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(error: std::io::Error) -> Self {
        CliError::new(EXIT_CONFIG, error.to_string())
    }
}

fn ledger_code(error: &LedgerError) -> i32 {
    match error {
        LedgerError::Io(_) => EXIT_CONFIG,
        _ => EXIT_CHAIN,
    }
}

fn print_warnings(warnings: &[Warning]) {
    for warning in warnings {
        match &warning.case_id {
            Some(case_id) => eprintln!("warning [{case_id}]: {}", warning.message),
            None => eprintln!("warning: {}", warning.message),
        }
    }
}

fn enforce_strict(strict: bool, warnings: &[Warning]) -> Result<(), CliError> {
    if strict && !warnings.is_empty() {
        let summary: Vec<String> = warnings
            .iter()
            .map(|w| match &w.case_id {
                Some(id) => format!("[{id}] {}", w.message),
                None => w.message.clone(),
            })
            .collect();
        return Err(CliError::new(
            EXIT_INVARIANT,
            format!(
                "strict mode: {} warning(s) treated as errors: {}",
                warnings.len(),
                summary.join("; ")
            ),
        ));
    }
    Ok(())
}

pub fn ingest(cases_path: &Path, ledger_path: &Path, strict: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(cases_path)?;
    let raw = parse_case_file(&text)?;
    // Full validation (schema, invariants, replay) before anything touches
    // the ledger.
    let loaded = validate_cases(&raw)?;
    print_warnings(&loaded.warnings);
    enforce_strict(strict, &loaded.warnings)?;

    let mut ledger = Ledger::open(ledger_path)?;
    let rollback_point = ledger.byte_len()?;
    let mut appended = 0usize;
    for case in &raw {
        let payloads = case_payloads(case).map_err(CliError::from);
        let result = payloads.and_then(|payloads| {
            for (kind, payload) in payloads {
                ledger
                    .append(kind, &case.case_id, payload)
                    .map_err(CliError::from)?;
                appended += 1;
            }
            Ok(())
        });
        if let Err(error) = result {
            // Command-scoped rollback: leave the ledger exactly as found.
            ledger.truncate_to(rollback_point).map_err(CliError::from)?;
            return Err(error);
        }
    }
    println!(
        "ingested {} case(s) as {} record(s) into {}",
        raw.len(),
        appended,
        ledger_path.display()
    );
    Ok(())
}

pub struct AnalyzeArgs {
    pub input: PathBuf,
    pub tau: f64,
    pub algorithm: String,
    pub level: f64,
    pub ci_method: String,
    pub out: PathBuf,
    pub formats: Vec<String>,
    pub strict: bool,
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let algorithm: SimilarityAlgorithm = args
        .algorithm
        .parse()
        .map_err(|e: String| CliError::new(EXIT_CONFIG, e))?;
    let cfg = SimilarityConfig::new(args.tau, algorithm)
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("confidence level must lie in (0, 1), got {}", args.level),
        ));
    }
    let ci_override = parse_ci_method(&args.ci_method)?;
    let formats = parse_formats(&args.formats)?;

    let loaded: LoadedCohort = load_cohort(&args.input)?;
    print_warnings(&loaded.warnings);
    enforce_strict(args.strict, &loaded.warnings)?;
    if loaded.cases.is_empty() {
        return Err(CliError::new(EXIT_CONFIG, "cohort is empty"));
    }

    let results = analyze_cohort(&loaded.cases, &cfg);
    let mut metrics = cohort_metrics(&results, args.level)?;
    if let Some(method) = ci_override {
        for intervals in metrics.intervals.values_mut() {
            intervals.headline = method;
        }
        for stratum in metrics.per_stratum.values_mut() {
            for intervals in stratum.intervals.values_mut() {
                intervals.headline = method;
            }
        }
    }
    let monotonicity = check_monotonicity(&metrics);

    let mut provenance = Provenance::new();
    provenance
        .set("tool", "concord")
        .set("version", env!("CARGO_PKG_VERSION"))
        .set("command", "analyze")
        .set("input", args.input.display())
        .set("tau", args.tau)
        .set("algorithm", algorithm)
        .set("ci_level", args.level)
        .set("ci_method", &args.ci_method)
        .set("strict", args.strict)
        .set("n_cases", loaded.cases.len());

    std::fs::create_dir_all(&args.out)?;
    for format in &formats {
        match format {
            ArtifactFormat::Csv => {
                let path = args.out.join("per_case.csv");
                std::fs::write(&path, per_case_csv(&results, &provenance))?;
                println!("wrote {}", path.display());
            }
            ArtifactFormat::Json => {
                let path = args.out.join("summary.json");
                std::fs::write(
                    &path,
                    summary_json(&metrics, &monotonicity, &loaded.warnings, &provenance),
                )?;
                println!("wrote {}", path.display());
            }
            ArtifactFormat::Tsv => {
                let path = args.out.join("diff_breakdown.tsv");
                std::fs::write(&path, diff_tsv(&results, &provenance))?;
                println!("wrote {}", path.display());
            }
            ArtifactFormat::Table => {
                println!();
                print!("{}", render_table(&metrics));
                println!();
            }
        }
    }

    if !monotonicity.holds {
        return Err(CliError::new(
            EXIT_INTERNAL,
            format!(
                "internal consistency violated: {} (this indicates an implementation bug)",
                monotonicity.detail
            ),
        ));
    }
    println!("{}", monotonicity.detail);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArtifactFormat {
    Csv,
    Json,
    Tsv,
    Table,
}

fn parse_formats(formats: &[String]) -> Result<Vec<ArtifactFormat>, CliError> {
    let mut out = Vec::new();
    for format in formats {
        let parsed = match format.trim().to_ascii_lowercase().as_str() {
            "csv" => ArtifactFormat::Csv,
            "json" => ArtifactFormat::Json,
            "tsv" => ArtifactFormat::Tsv,
            "table" => ArtifactFormat::Table,
            other => {
                return Err(CliError::new(
                    EXIT_CONFIG,
                    format!("unknown format `{other}` (expected csv, json, tsv, table)"),
                ))
            }
        };
        if !out.contains(&parsed) {
            out.push(parsed);
        }
    }
    Ok(out)
}

fn parse_ci_method(name: &str) -> Result<Option<CiMethod>, CliError> {
    match name.replace('-', "_").to_ascii_lowercase().as_str() {
        "auto" => Ok(None),
        "wald" => Ok(Some(CiMethod::Wald)),
        "wilson" => Ok(Some(CiMethod::Wilson)),
        "clopper_pearson" => Ok(Some(CiMethod::ClopperPearson)),
        other => Err(CliError::new(
            EXIT_CONFIG,
            format!("unknown CI method `{other}` (expected auto, wald, wilson, clopper-pearson)"),
        )),
    }
}

pub fn verify(ledger_path: &Path) -> Result<(), CliError> {
    let report = verify_chain(ledger_path)?;
    if report.valid {
        println!(
            "ledger {} is valid: {} record(s) verified",
            ledger_path.display(),
            report.records_checked
        );
        Ok(())
    } else {
        Err(CliError::new(
            EXIT_CHAIN,
            format!(
                "ledger {} is INVALID at seq {}: {}",
                ledger_path.display(),
                report.first_invalid_seq.unwrap_or_default(),
                report.detail.unwrap_or_default()
            ),
        ))
    }
}

pub fn replay(input: &Path) -> Result<(), CliError> {
    let loaded = load_cohort(input)?;
    let summary = replay_cohort(&loaded.cases)?;
    println!(
        "replay consistent: {}/{} case(s) with action logs reproduce their stored final report \
         ({} case(s) total)",
        summary.cases_with_actions, summary.cases_with_actions, summary.total_cases
    );
    Ok(())
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub seed: u64,
    pub cases: u64,
    pub p_exact: f64,
    pub p_lexical: f64,
    pub p_reprioritize: f64,
    pub p_replace: f64,
    pub p_remove: f64,
    pub p_add: f64,
    pub vocab: Option<PathBuf>,
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut cfg = PerturbationConfig::new(args.seed, args.cases);
    cfg.p_exact = args.p_exact;
    cfg.p_lexical = args.p_lexical;
    cfg.p_reprioritize = args.p_reprioritize;
    cfg.p_replace = args.p_replace;
    cfg.p_remove = args.p_remove;
    cfg.p_add = args.p_add;
    if let Some(vocab_path) = &args.vocab {
        let text = std::fs::read_to_string(vocab_path)?;
        cfg.vocab = text
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty())
            .map(str::to_owned)
            .collect();
    }

    let cases = generate_cohort(&cfg)?;
    let raw: Vec<_> = cases.iter().map(raw_from_case).collect();
    std::fs::write(&args.out, write_case_file(&raw))?;
    println!(
        "generated {} case(s) with seed {} into {}",
        cases.len(),
        args.seed,
        args.out.display()
    );
    Ok(())
}
