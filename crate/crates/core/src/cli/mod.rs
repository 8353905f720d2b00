//! Command-line front end. This is the only module that touches the file
//! system for results.

mod output;
mod report;
mod run;

pub use output::{RecordRow, ReplicationReport, RunReport, SCHEMA_VERSION};
pub use run::{execute_run, manifest_hash, RunManifest};

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::config::ConfigError;
use crate::cost::{break_even, CostError};
use crate::experiments::{ExperimentError, ExperimentKind};

#[derive(Debug, Parser)]
#[command(name = "faasim", version, about = "FaaS benchmarking harness on a deterministic platform simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write manifest.json, report.json and records.csv.
    Run(RunArgs),
    /// Turn a finished run into per-figure CSV tables.
    Report(ReportArgs),
    /// Requests per hour at which pay-per-use matches a rented VM.
    BreakEven(BreakEvenArgs),
    /// List the built-in provider profiles and workloads.
    Presets,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_experiment)]
    pub experiment: ExperimentKind,
    #[arg(long, default_value = "aws-like")]
    pub profile: String,
    #[arg(long, default_value = "dynamic-html-py")]
    pub workload: String,
    /// Overrides `simulator.seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub replications: u32,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run replications on worker threads.
    #[arg(long)]
    pub parallel: bool,
    /// Also write the simulator event trace as trace.jsonl.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BreakEvenArgs {
    /// `COST_PER_MILLION:VM_HOURLY` pairs in USD.
    #[arg(required = true, value_parser = parse_pair)]
    pub pairs: Vec<(f64, f64)>,
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected COST:HOURLY")?;
    let cost = a.trim().parse::<f64>().map_err(|e| format!("cost: {e}"))?;
    let hourly = b.trim().parse::<f64>().map_err(|e| format!("hourly: {e}"))?;
    Ok((cost, hourly))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Cost(_) => 2,
            CliError::Io { .. } | CliError::OutputExists(_) => 3,
            CliError::Experiment(_) => 4,
            CliError::InvalidInput(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(ConfigError::UnknownKey(_)) => "unknown-key",
            CliError::Config(ConfigError::UnknownProfile(_)) => "unknown-profile",
            CliError::Config(ConfigError::UnknownWorkload(_)) => "unknown-workload",
            CliError::Config(_) => "invalid-config",
            CliError::Io { .. } => "io",
            CliError::OutputExists(_) => "output-exists",
            CliError::Experiment(_) => "experiment-failed",
            CliError::Cost(_) => "invalid-argument",
            CliError::InvalidInput(_) => "invalid-input",
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config(c) = self {
            if let Some(key) = c.key() {
                v["key"] = json!(key);
            }
        }
        if let CliError::Experiment(ExperimentError::Aborted { partial, .. }) = self {
            v["partial_records"] = json!(partial.len());
        }
        v
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let summary = run::cmd_run(&args)?;
            println!("{summary}");
            Ok(())
        }
        Command::Report(args) => {
            let written = report::cmd_report(&args.input, args.out.as_deref())?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::BreakEven(args) => {
            let rows = args
                .pairs
                .iter()
                .map(|&(cost, hourly)| {
                    let r = break_even(cost, hourly)?;
                    Ok(json!({
                        "faas_cost_per_million": cost,
                        "vm_hourly_cost": hourly,
                        "requests_per_hour": r.requests_per_hour,
                    }))
                })
                .collect::<Result<Vec<_>, CostError>>()?;
            println!("{}", serde_json::Value::Array(rows));
            Ok(())
        }
        Command::Presets => {
            let config = crate::config::Config::default();
            let v = json!({
                "providers": config.providers.keys().collect::<Vec<_>>(),
                "workloads": config.workloads.keys().collect::<Vec<_>>(),
            });
            println!("{v}");
            Ok(())
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
