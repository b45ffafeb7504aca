//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or a failed check, 2 degenerate
//! math (duplicate samples in MI estimation without jitter).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::condense::{condense_dataset, CondenseConfig, CondenseError, Strategy};
use crate::mi::{estimate_mi, validate_file, validate_gaussian, EmbeddingMatrix, Jitter, MiError, MiOptions};
use crate::perturb::{perturb_dataset, MatchLength, PerturbError, PerturbationConfig, Region, SentencePool};
use crate::stats::stats_dataset;
use crate::trace::{DatasetError, FieldMapping, ReadMode, ReflectionLexicon, TraceError, DEFAULT_DELIMITER};
use crate::REPORT_SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "thoughtprune", version, about = "Condense, perturb and measure chain-of-thought traces")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Base seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reflection lexicon file, one marker per line.
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// Thought delimiter; backslash escapes \n \t \r \\ are expanded.
    #[arg(long, global = true)]
    pub delimiter: Option<String>,
    #[arg(long, global = true)]
    pub question_field: Option<String>,
    #[arg(long, global = true)]
    pub trace_field: Option<String>,
    #[arg(long, global = true)]
    pub answer_field: Option<String>,
    #[arg(long, global = true)]
    pub id_field: Option<String>,
    /// Skip malformed dataset lines instead of failing.
    #[arg(long, global = true)]
    pub skip_bad_lines: bool,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Condense every trace in a dataset.
    Condense(CondenseArgs),
    /// Replace content of selected thoughts while keeping reflection markers.
    Perturb(PerturbArgs),
    /// Estimate mutual information between two .embm files.
    Mi(MiArgs),
    /// Length and reflection statistics for a dataset.
    Stats(StatsArgs),
    /// Check the MI estimator against correlated Gaussians.
    ValidateMi(ValidateMiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct CondenseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Epic)]
    pub strategy: Strategy,
    /// Condensation ratio in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub min_keep: Toggle,
    /// Abort on the first example that cannot be condensed.
    #[arg(long)]
    pub fail_fast: bool,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Region::Middle)]
    pub region: Region,
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    /// Plain-text corpus of replacement sentences.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_enum, default_value_t = MatchLength::Off)]
    pub match_length: MatchLength,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct MiArgs {
    #[command(subcommand)]
    pub action: Option<MiAction>,
    #[arg(long = "a", required = true)]
    pub a: Option<PathBuf>,
    #[arg(long = "b", required = true)]
    pub b: Option<PathBuf>,
    #[arg(long, default_value_t = crate::mi::DEFAULT_K)]
    pub k: usize,
    /// Add seeded uniform noise of this magnitude (1e-10 if given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-10")]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub allow_dim_mismatch: bool,
}

#[derive(Debug, Subcommand)]
pub enum MiAction {
    /// Check .embm headers and contents.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateMiArgs {
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    #[arg(long, default_value_t = crate::mi::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    pub rho: f64,
    /// Absolute tolerance in nats (default 0.1 for m >= 1000, else 0.3).
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// Values a `--config` file may set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub question_field: Option<String>,
    pub trace_field: Option<String>,
    pub answer_field: Option<String>,
    pub id_field: Option<String>,
    pub delimiter: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub threads: Option<usize>,
    pub skip_bad_lines: Option<bool>,
}

/// Merged configuration handed to every subcommand.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mapping: FieldMapping,
    pub delimiter: String,
    pub lexicon: ReflectionLexicon,
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub threads: Option<usize>,
    pub read_mode: ReadMode,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Condense(#[from] CondenseError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Mi(#[from] MiError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("check failed")]
    CheckFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mi(e) if e.is_degenerate() => EXIT_DEGENERATE,
            _ => EXIT_INVALID,
        }
    }
}

/// Expands `\n`, `\t`, `\r` and `\\` in a delimiter given on the command line.
pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn resolve(global: &GlobalArgs) -> Result<Resolved, CliError> {
    let file: GlobalConfig = match &global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config { path: path.display().to_string(), message: e.to_string() })?
        }
        None => GlobalConfig::default(),
    };
    let defaults = FieldMapping::default();
    let pick = |flag: &Option<String>, conf: &Option<String>, default: String| flag.clone().or(conf.clone()).unwrap_or(default);
    let mapping = FieldMapping {
        question: pick(&global.question_field, &file.question_field, defaults.question),
        trace: pick(&global.trace_field, &file.trace_field, defaults.trace),
        answer: pick(&global.answer_field, &file.answer_field, defaults.answer),
        id: pick(&global.id_field, &file.id_field, defaults.id),
    };
    let delimiter = match global.delimiter.as_deref() {
        Some(d) => unescape(d),
        None => file.delimiter.unwrap_or_else(|| DEFAULT_DELIMITER.to_owned()),
    };
    if delimiter.is_empty() {
        return Err(TraceError::EmptyDelimiter.into());
    }
    let lexicon = match global.lexicon.as_ref().or(file.lexicon.as_ref()) {
        Some(path) => ReflectionLexicon::from_file(path)?,
        None => ReflectionLexicon::default(),
    };
    let skip = global.skip_bad_lines || file.skip_bad_lines.unwrap_or(false);
    Ok(Resolved {
        mapping,
        delimiter,
        lexicon,
        seed: global.seed.or(file.seed),
        report: global.report.clone().or(file.report),
        threads: global.threads.or(file.threads),
        read_mode: if skip { ReadMode::Skip } else { ReadMode::FailFast },
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    report: &'a T,
}

fn emit<T: Serialize>(command: &str, report: &T, to_file: Option<&Path>, to_stdout: bool) -> Result<(), CliError> {
    let env = Envelope { schema_version: REPORT_SCHEMA_VERSION, command, report };
    let json = serde_json::to_string_pretty(&env).expect("reports serialize");
    if let Some(path) = to_file {
        fs::write(path, format!("{json}\n")).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    }
    if to_stdout {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{json}").map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
    }
    Ok(())
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
}

/// Runs one parsed invocation.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.global)?;
    init_threads(cfg.threads);
    let report_file = cfg.report.as_deref();
    match &cli.command {
        Command::Condense(args) => {
            let config = CondenseConfig {
                strategy: args.strategy,
                tau: args.ratio,
                delimiter: cfg.delimiter.clone(),
                seed: cfg.seed,
                mapping: cfg.mapping.clone(),
                min_keep: args.min_keep == Toggle::On,
                read_mode: cfg.read_mode,
                fail_on_example_error: args.fail_fast,
            };
            let report = condense_dataset(&args.input, &args.output, &config)?;
            log::info!(
                "condensed {} examples: {} -> {} thoughts ({:.4})",
                report.examples_written,
                report.thoughts_before,
                report.thoughts_after,
                report.retention
            );
            emit("condense", &report, report_file, report_file.is_none())
        }
        Command::Perturb(args) => {
            let seed = cfg.seed.ok_or_else(|| CliError::Usage("perturb requires --seed".into()))?;
            let pool = SentencePool::from_file(&args.pool, &cfg.lexicon)?;
            let mut config = PerturbationConfig::new(args.region, args.fraction, cfg.lexicon.clone(), pool, seed);
            config.match_length = args.match_length;
            let report = perturb_dataset(&args.input, &args.output, &config, &cfg.delimiter, &cfg.mapping, cfg.read_mode)?;
            emit("perturb", &report, report_file, report_file.is_none())
        }
        Command::Mi(args) => match &args.action {
            Some(MiAction::Validate { files }) => {
                let mut headers = Vec::with_capacity(files.len());
                for f in files {
                    let h = validate_file(f)?;
                    headers.push(serde_json::json!({ "path": f.display().to_string(), "header": h }));
                }
                emit("mi-validate", &headers, report_file, true)
            }
            None => {
                let (Some(a), Some(b)) = (&args.a, &args.b) else {
                    return Err(CliError::Usage("mi needs --a and --b".into()));
                };
                let a = EmbeddingMatrix::read(a)?;
                let b = EmbeddingMatrix::read(b)?;
                let opts = MiOptions {
                    k: args.k,
                    jitter: args.jitter.map(|magnitude| Jitter { magnitude, seed: cfg.seed.unwrap_or(0) }),
                    standardize: args.standardize,
                    allow_dim_mismatch: args.allow_dim_mismatch,
                };
                let est = estimate_mi(&a, &b, &opts)?;
                emit("mi", &est, report_file, true)
            }
        },
        Command::Stats(args) => {
            let report = stats_dataset(&args.input, &cfg.mapping, cfg.read_mode, &cfg.lexicon, &cfg.delimiter)?;
            emit("stats", &report, report_file, true)
        }
        Command::ValidateMi(args) => {
            let report = validate_gaussian(args.m, args.k, args.rho, cfg.seed.unwrap_or(0), args.tolerance)?;
            emit("validate-mi", &report, report_file, true)?;
            if report.pass {
                Ok(())
            } else {
                Err(CliError::CheckFailed)
            }
        }
    }
}

/// Parses `args`, runs, logs any error and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
