//! `spatial-vqa`: prepare, answer and score region-aware spatial questions.
//!
//! Data goes to files only; progress and errors go to stderr. Exit codes:
//! 0 success, 1 usage error, 2 bad input data, 3 internal failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "spatial-vqa", version, about, propagate_version = true)]
struct Cli {
    /// Worker threads; outputs are identical for any value.
    #[arg(long, global = true, env = "SPATIAL_VQA_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replace each <mask> with its region and bounding box.
    Enrich(EnrichArgs),
    /// Extract canonical answers from raw model outputs.
    Normalize(NormalizeArgs),
    /// Score predictions against ground-truth records.
    Evaluate(EvaluateArgs),
    /// Answer structured questions with the geometric baseline.
    Baseline(BaselineArgs),
    /// Generate synthetic scenes, records and structured questions.
    Generate(GenerateArgs),
    /// Draw a seeded sample of records without replacement.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct EnrichArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Decimal places for coordinates; full precision when omitted.
    #[arg(long)]
    precision: Option<usize>,
    /// Copy questions unchanged (ablation run).
    #[arg(long)]
    no_enrich: bool,
    /// Also end each free-form answer with "In short, the normalized answer is <label>."
    #[arg(long)]
    append_suffix: bool,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Where to copy predictions whose answer could not be extracted.
    #[arg(long)]
    flagged_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Structured,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenes.
    #[arg(long, default_value_t = 10)]
    scenes: usize,
    /// Number of questions, spread round-robin over the scenes.
    #[arg(long, default_value_t = 100)]
    questions: usize,
    /// Proportions for distance,count,left_right,mcq.
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    mix: String,
    #[arg(long, default_value_t = 2)]
    shelves: usize,
    #[arg(long, default_value_t = 3)]
    buffers: usize,
    /// Pallets per buffer as `N` or `MIN-MAX`.
    #[arg(long, default_value = "1-4")]
    pallets: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(usize::from(n));
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Enrich(a) => commands::enrich(
            &a.records,
            &a.scenes,
            &a.out,
            a.precision,
            !a.no_enrich,
            a.append_suffix,
        ),
        Command::Normalize(a) => commands::normalize(&a.predictions, &a.out, a.flagged_out.as_deref()),
        Command::Evaluate(a) => commands::evaluate(
            &a.records,
            &a.predictions,
            &a.report,
            a.format == ReportFormat::Structured,
        ),
        Command::Baseline(a) => commands::baseline(&a.questions, &a.scenes, &a.out),
        Command::Generate(a) => {
            let config = commands::gen_config(a.seed, &a.mix, a.shelves, a.buffers, &a.pallets)?;
            commands::generate(&config, a.scenes, a.questions, &a.out_dir)
        }
        Command::Sample(a) => commands::sample(&a.records, a.k, a.seed, &a.out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
