mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{AggregateArgs, EvalArgs, PipelineArgs, SampleArgs, SynthArgs, TuneArgs};

/// Consensus aggregation of noisy graph samples.
#[derive(Parser, Debug)]
#[command(name = "graphmdl", version, about, arg_required_else_help = true, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Re-run the command recorded in a manifest and verify that inputs and
    /// outputs hash identically.
    #[arg(long, value_name = "MANIFEST")]
    check_manifest: Option<PathBuf>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Aggregate a sample set into one graph.
    Aggregate(AggregateArgs),
    /// Grid-search lambda1/lambda2 on labeled training instances.
    Tune(TuneArgs),
    /// Score predicted graphs against gold graphs.
    Eval(EvalArgs),
    /// Generate a synthetic truth graph and noisy samples of it.
    Synth(SynthArgs),
    /// Draw samples from a chat-completion endpoint.
    Sample(SampleArgs),
    /// Synthetic sweep: generate, aggregate and score over many seeds.
    Pipeline(PipelineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Aggregate(_) => "aggregate",
            Command::Tune(_) => "tune",
            Command::Eval(_) => "eval",
            Command::Synth(_) => "synth",
            Command::Sample(_) => "sample",
            Command::Pipeline(_) => "pipeline",
        }
    }
}

/// Error classes with their own exit codes; anything else exits with 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Config,
    Data,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Failure::Config => "configuration error",
            Failure::Data => "data error",
        })
    }
}

pub trait Classify<T> {
    fn or_fail(self, kind: Failure) -> anyhow::Result<T>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn or_fail(self, kind: Failure) -> anyhow::Result<T> {
        self.map_err(|e| anyhow::Error::new(e).context(kind))
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !parts.last().is_some_and(|p| p.ends_with(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match (cli.check_manifest, cli.command) {
        (Some(path), _) => manifest::check(&path),
        (None, Some(cmd)) => commands::execute(cmd).map(|run| run.timed_out),
        (None, None) => unreachable!("clap requires a subcommand or --check-manifest"),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            log::warn!("solver budget exhausted; outputs hold heuristic results");
            ExitCode::from(EXIT_TIMEOUT)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            match e.downcast_ref::<Failure>() {
                Some(Failure::Config) => ExitCode::from(EXIT_CONFIG),
                Some(Failure::Data) => ExitCode::from(EXIT_DATA),
                None => ExitCode::FAILURE,
            }
        }
    }
}
