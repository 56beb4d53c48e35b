//! Command-line driver for the promptner pipeline.
//!
//! Every stage is a subcommand working inside one workdir; see
//! [`workdir`] for the layout and [`config::PipelineConfig`] for the keys.

pub mod commands;
pub mod config;
pub mod error;
pub mod workdir;

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::PathBuf;

pub use commands::Command;
pub use config::PipelineConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "promptner",
    version,
    about = "Self-generated prompt optimization and ensemble inference for clinical NER",
    after_help = "Every config key can be overridden after the subcommand as --key value \
                  (see `promptner keys`). The backend API key is read from PROMPTNER_API_KEY."
)]
pub struct Cli {
    /// Pipeline config file (TOML).
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Config overrides: --key value
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    pub rest: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Validate and copy notes and annotations into the workdir
    Ingest(Overrides),
    /// Split notes into sentences
    Segment(Overrides),
    /// Label sentences, split them and revise the training positives
    BuildDatasets(Overrides),
    /// Generate, verify and refine candidate prompts per entity
    GenPrompts(Overrides),
    /// Choose each entity's prompt ensemble
    SelectPrompts(Overrides),
    /// Run two-stage ensemble inference on the evaluation notes
    Infer(Overrides),
    /// Score predictions against the evaluation annotations
    Evaluate(Overrides),
    /// Write the supervised fine-tuning dataset
    ExportSft(Overrides),
    /// Query the fine-tuned model and write preference pairs
    ExportDpo(Overrides),
    /// Decide whether preference optimization should run
    GateDpo(Overrides),
    /// Print the evaluation table
    Report(Overrides),
    /// Print token usage per command and stage
    TokenUsage(Overrides),
    /// List the config keys with their defaults
    Keys,
}

impl Sub {
    fn split(self) -> Option<(Command, Vec<String>)> {
        let (c, o) = match self {
            Sub::Ingest(o) => (Command::Ingest, o),
            Sub::Segment(o) => (Command::Segment, o),
            Sub::BuildDatasets(o) => (Command::BuildDatasets, o),
            Sub::GenPrompts(o) => (Command::GenPrompts, o),
            Sub::SelectPrompts(o) => (Command::SelectPrompts, o),
            Sub::Infer(o) => (Command::Infer, o),
            Sub::Evaluate(o) => (Command::Evaluate, o),
            Sub::ExportSft(o) => (Command::ExportSft, o),
            Sub::ExportDpo(o) => (Command::ExportDpo, o),
            Sub::GateDpo(o) => (Command::GateDpo, o),
            Sub::Report(o) => (Command::Report, o),
            Sub::TokenUsage(o) => (Command::TokenUsage, o),
            Sub::Keys => return None,
        };
        Some((c, o.rest))
    }
}

fn default_keys() -> String {
    let table = toml::Table::try_from(PipelineConfig::default()).expect("config serializes");
    let mut out = String::new();
    for key in config::keys() {
        match table.get(&key) {
            Some(v) => out.push_str(&format!("{key} = {v}\n")),
            None => out.push_str(&format!("{key} (unset)\n")),
        }
    }
    out
}

/// Pulls `--config` and `-v` out of the override list, where clap leaves
/// them once the first override has been seen.
fn lift_global_flags(
    tokens: Vec<String>,
    config: &mut Option<PathBuf>,
    verbose: &mut u8,
) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    let mut it = tokens.into_iter();
    while let Some(t) = it.next() {
        if t == "--config" || t == "-c" {
            let v = it.next().ok_or_else(|| CliError::Usage(format!("{t} needs a value")))?;
            *config = Some(PathBuf::from(v));
        } else if let Some(v) = t.strip_prefix("--config=") {
            *config = Some(PathBuf::from(v));
        } else if t == "--verbose"
            || (t.len() > 1 && t.starts_with('-') && !t.starts_with("--") && t[1..].chars().all(|c| c == 'v'))
        {
            *verbose = verbose.saturating_add(if t == "--verbose" { 1 } else { (t.len() - 1) as u8 });
        } else {
            out.push(t);
        }
    }
    Ok(out)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some((command, overrides)) = cli.command.split() else {
        print!("{}", default_keys());
        return 0;
    };
    let overrides = match lift_global_flags(overrides, &mut cli.config, &mut cli.verbose) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("promptner {}: {e}", command.name());
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .without_time()
        .try_init();

    let result = PipelineConfig::load(cli.config.as_deref(), &overrides).and_then(|cfg| commands::run(command, &cfg));
    match result {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("promptner {}: {e}", command.name());
            e.exit_code()
        }
    }
}
