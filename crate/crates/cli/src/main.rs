//! `editsum`: build and evaluate edit-summary datasets.

mod config;
mod error;
mod evaluate;
mod jsonl;
mod pipeline;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "editsum", version, about = "Edit-summary corpus and evaluation pipeline")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch edits from the API or a history dump.
    Ingest(pipeline::IngestArgs),
    /// Reduce revision pairs to sentence diffs.
    Diff(IoArgs),
    /// Apply cleaning rules, quality filters and the duplicate cap.
    Curate(pipeline::CurateArgs),
    /// Generate synthetic summaries with a chat model.
    Synth(pipeline::SynthArgs),
    /// Assemble train/validation/test splits.
    Mix(pipeline::MixArgs),
    /// ROUGE and external-scorer reports.
    EvalAuto(evaluate::EvalAutoArgs),
    /// Ballot scores, agreement, Plackett-Luce and head-to-head tests.
    EvalHuman(evaluate::EvalHumanArgs),
    /// Agreement and bound ranges for qualitative codes.
    Qualcode(evaluate::TableArgs),
    /// Error-analysis proportions.
    Errors(evaluate::TableArgs),
    /// Check a JSON-lines file against its record schema.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Schema name; taken from the file header when omitted.
    #[arg(long)]
    schema: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Ingest(args) => pipeline::ingest(&config, args),
        Command::Diff(args) => pipeline::diff(args),
        Command::Curate(args) => pipeline::curate(&mut config, args),
        Command::Synth(args) => pipeline::synth(&mut config, args),
        Command::Mix(args) => pipeline::mix(&mut config, args),
        Command::EvalAuto(args) => evaluate::eval_auto(&config, args),
        Command::EvalHuman(args) => evaluate::eval_human(&mut config, args),
        Command::Qualcode(args) => evaluate::qualcode(args),
        Command::Errors(args) => evaluate::errors(args),
        Command::Validate(args) => {
            let violations = schema::validate_schema(&args.input, args.schema.as_deref())?;
            for v in &violations {
                println!("{}:{}: {}", args.input.display(), v.line, v.message);
            }
            if violations.is_empty() {
                println!("{}: ok", args.input.display());
                Ok(())
            } else {
                Err(error::Invalid(format!("{} violation(s)", violations.len())).into())
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error::exit_code(&e) as u8)
        }
    }
}
