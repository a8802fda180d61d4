//! `aste`: ingest, validate, train, extract and evaluate from the shell.
//!
//! Exit codes: 0 on success, 1 when the input or configuration is invalid,
//! 2 when the environment fails (unreadable files, full disks).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aste_core::corpus::Platform;
use aste_core::ingest::ExportFormat;

#[derive(Parser, Debug)]
#[command(name = "aste", version, about = "Aspect-opinion-sentiment triplet extraction for Bangla reviews")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set spanex.tau_s=0.4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read platform exports, filter them and write an unannotated corpus.
    Ingest(IngestArgs),
    /// Check a corpus file record by record.
    Validate(ValidateArgs),
    /// Majority-vote gold for every record with annotations.
    Adjudicate(CorpusArg),
    /// Per-platform and per-category counts of an adjudicated corpus.
    Stats(StatsArgs),
    /// Train a model bundle.
    Train(OptionalCorpus),
    /// Extract triplets with a trained bundle.
    Extract(ExtractArgs),
    /// Score a bundle against an adjudicated corpus.
    Eval(EvalArgs),
    /// k-fold cross-validation of the configured pipeline.
    Crossval(OptionalCorpus),
    /// Generate a synthetic annotated corpus with matching lexicons.
    Synth(SynthArgs),
    /// Configuration utilities.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand, Debug)]
pub enum ConfigCommand {
    /// Print the effective configuration and its digest.
    Show,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Export files (CSV, TSV or JSON lines).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_platform)]
    pub platform: Platform,
    /// Overrides detection from the file extension.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<ExportFormat>,
    #[arg(long, default_value = "text")]
    pub text_column: String,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long)]
    pub category_column: Option<String>,
    #[arg(long)]
    pub max_emoji_ratio: Option<f64>,
    #[arg(long)]
    pub min_words: Option<usize>,
    #[arg(long)]
    pub keep_duplicates: bool,
    /// Reject reviews containing this literal text. Repeatable.
    #[arg(long = "block")]
    pub blocked: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub corpus: PathBuf,
    /// Accept records with no annotations, as written by `ingest`.
    #[arg(long)]
    pub allow_unannotated: bool,
    /// Also check the corpus against a statistics manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CorpusArg {
    pub corpus: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OptionalCorpus {
    /// Defaults to `paths.corpus` from the configuration.
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Defaults to `paths.bundle` from the configuration.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Raw review text; otherwise reviews are read from CORPUS.
    #[arg(long, conflicts_with = "corpus")]
    pub text: Option<String>,
    pub corpus: Option<PathBuf>,
    /// Run even when `--config` hashes differently from the bundle.
    #[arg(long)]
    pub allow_digest_mismatch: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub allow_digest_mismatch: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub reviews: usize,
    #[arg(long, default_value_t = 2)]
    pub max_triplets: usize,
    #[arg(long, default_value_t = 3)]
    pub annotators: usize,
}

fn parse_platform(s: &str) -> Result<Platform, String> {
    s.parse().map_err(|e: aste_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(ExportFormat::Csv),
        "tsv" => Ok(ExportFormat::Tsv),
        "jsonl" => Ok(ExportFormat::Jsonl),
        other => Err(format!("unknown format `{other}` (csv, tsv, jsonl)")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASTE_LOG", "info"))
        .format_target(false)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
