//! `lexaudit`: fixture generation, prediction collection, analysis and
//! reporting for judicial fairness audits.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 endpoint authentication error, 4 endpoint unreachable.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{CliError, EXIT_USAGE};
use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "lexaudit", version, about = "Counterfactual fairness audits of sentencing predictions")]
struct Cli {
    /// TOML file of settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus and stub predictions (--out, optional --spec, --seed).
    Fixture,
    /// Query a chat-completions endpoint for every document and variant.
    Generate,
    /// Validate external prediction files and store them per model.
    Ingest,
    /// Compute the metrics and write tables, JSON and report.html.
    Analyze,
    /// Re-render tables and report.html from an existing bundle.json.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => cli.settings.over(Settings::load_file(path)?),
        None => cli.settings,
    };
    match cli.command {
        Command::Fixture => commands::fixture(&settings),
        Command::Generate => commands::generate(&settings),
        Command::Ingest => commands::ingest(&settings),
        Command::Analyze => commands::analyze(&settings),
        Command::Report => commands::report(&settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lexaudit: {e}");
            ExitCode::from(e.code)
        }
    }
}
