//! `groundrl` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 input-file error, 3 validation
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "groundrl", version, about = "Entity-aware reward scoring, evaluation and toy GRPO training")]
pub struct Cli {
    /// TOML file overriding reward weights and tiers.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// Human-readable `key: value` lines.
    Text,
    /// One JSON object per line.
    Record,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score completions against their instances.
    Score {
        /// Line-delimited `{"instance_id", "completion"}` records.
        completions: PathBuf,
        dataset: PathBuf,
    },
    /// Compute Acc@threshold metrics for predictions.
    Evaluate {
        predictions: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value_t = groundrl::evaluation::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Also write the report as JSON to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Include per-instance hits.
        #[arg(long)]
        per_instance: bool,
    },
    /// Check a dataset against the schema and print split statistics.
    Validate { dataset: PathBuf },
    /// Run SFT and/or GRPO on a tabular toy policy.
    TrainToy(TrainArgs),
    /// Answer scoring requests on stdin until shutdown or end of input.
    Serve { dataset: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskKind {
    /// One instance, choice between its canonical completion and a refusal.
    TwoCompletion,
    /// Every training instance, fine-grained symbol vocabulary.
    Tokenized,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    /// Skip the SFT stage and use the raised format-reward weights.
    #[arg(long, conflicts_with = "sft_only")]
    pub grpo_only: bool,
    #[arg(long)]
    pub sft_only: bool,
    #[arg(long, value_enum, default_value_t = TaskKind::TwoCompletion)]
    pub task: TaskKind,
    /// Instance for the two-completion task; defaults to the first training instance.
    #[arg(long)]
    pub instance: Option<String>,
    /// Trace CSV destination; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub trace_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GRPO steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub sft_steps: Option<usize>,
    /// GRPO learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub sft_lr: Option<f64>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub kl_beta: Option<f64>,
    #[arg(long)]
    pub clip_epsilon: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(msg) = e.message() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.code())
        }
    }
}
