//! `paraprobe` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 provider or transport error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use paraprobe::classifier::Level;

#[derive(Parser, Debug)]
#[command(name = "paraprobe", version, about = "Detect LLM-written answers by paraphrase probing")]
pub struct Cli {
    /// Run configuration (TOML). Defaults use offline mock providers.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Response cache directory; overrides `paths.cache_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Provider kind for every role; overrides the per-role `kind`.
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderArg>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalize a raw corpus into canonical JSON lines.
    Ingest(IngestArgs),
    /// Score the HM and MM pairs of a canonical corpus.
    ScorePairs(ScorePairsArgs),
    /// Fit a classifier on a score table.
    Fit(FitArgs),
    /// Analyse one student response.
    Detect(DetectArgs),
    /// Render a saved detection report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProviderArg {
    Mock,
    Openai,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Hc3,
    WikiIntro,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: InputFormat,
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Canonical corpus to write; overrides `paths.corpus`.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Keep only the first N valid records.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScorePairsArgs {
    /// Canonical corpus; overrides `paths.corpus`.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Score table (CSV) to write.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Persist every sentence embedding here; overrides `paths.vector_store`.
    #[arg(long, value_name = "PATH")]
    pub vector_store: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    #[arg(long)]
    pub level: Level,
    /// Where the model and statistics go; overrides `paths.output_dir`.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sweep_step: Option<f64>,
    #[arg(long)]
    pub positive_class: Option<u8>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("q").required(true).args(["question", "question_file"]))]
#[command(group = clap::ArgGroup::new("r").required(true).args(["response", "response_file"]))]
pub struct DetectArgs {
    #[arg(long)]
    pub question: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub question_file: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub response_file: Option<PathBuf>,
    /// Overrides `paths.sentence_model`.
    #[arg(long, value_name = "PATH")]
    pub sentence_model: Option<PathBuf>,
    /// Overrides `paths.document_model`.
    #[arg(long, value_name = "PATH")]
    pub document_model: Option<PathBuf>,
    /// Answer k paraphrases of the question as well.
    #[arg(long)]
    pub paraphrase: bool,
    #[arg(long)]
    pub k: Option<usize>,
    /// With --paraphrase, leave the original question's answer out of the pool.
    #[arg(long)]
    pub exclude_original: bool,
    /// Write `report.json` and `report.txt` here; overrides `paths.output_dir`.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub vector_store: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(value_name = "REPORT")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("PARAPROBE_LOG")
        .init();

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
