//! `tabsynth`: profile a real table, build generation prompts, generate
//! synthetic copies and score them.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Backend;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tabsynth",
    version,
    about = "Profile, prompt, generate and evaluate synthetic tabular data"
)]
pub struct Cli {
    /// TOML file with [generation], [llm] and [metrics] sections.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Base seed for the local backend; trial i uses seed + i.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a real CSV into profile.json and a prompt-ready profile.
    Profile(ProfileArgs),
    /// Render the generation prompt for a profile.
    Prompt(PromptArgs),
    /// Produce synthetic CSVs from a profile.
    Generate(GenerateArgs),
    /// Score synthetic CSVs against the real one.
    Evaluate(EvaluateArgs),
    /// Write correlation matrices, CI tables and frequency tables for plotting.
    ExportPlots(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RealArgs {
    /// Real data CSV with a header row.
    #[arg(long)]
    pub real: PathBuf,
    /// JSON table schema.
    #[arg(long)]
    pub schema: PathBuf,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    pub drop_incomplete: bool,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub real: RealArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Decimals of the prompt-ready profile.
    #[arg(long)]
    pub decimals: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PromptOptions {
    /// Prompt template file with {placeholder} slots.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub decimals: Option<u32>,
    /// Smallest |r| listed in the prompt.
    #[arg(long)]
    pub corr_threshold: Option<f64>,
    /// List every column pair regardless of |r|.
    #[arg(long)]
    pub include_all_correlations: bool,
    /// Ask for CSV text in the reply instead of a spreadsheet file.
    #[arg(long)]
    pub inline_csv: bool,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// profile.json written by `profile`.
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Rows to request; defaults to the real row count.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: PromptOptions,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Independent datasets to generate.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Saved model replies to parse instead of calling the endpoint, one per
    /// trial (llm backend only).
    #[arg(long)]
    pub response: Vec<PathBuf>,
    /// File stem of the generated CSVs.
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[command(flatten)]
    pub options: PromptOptions,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub real: RealArgs,
    #[arg(long, required = true)]
    pub synth: Vec<PathBuf>,
    /// Column headings, one per --synth; file stems by default.
    #[arg(long)]
    pub label: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Relative tolerance for matching rows in NewRowSynthesis.
    #[arg(long)]
    pub tol_rel: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub real: RealArgs,
    #[arg(long)]
    pub synth: Vec<PathBuf>,
    #[arg(long)]
    pub label: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let message = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::Usage(message.to_string()).line());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
