//! `trlkit` command line: simulate inputs, quantify resilience loss, fit the
//! county model and export report files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use trlkit_core::synth::SimulationConfig;

use crate::commands::{cmd_fit, cmd_quantify, cmd_report, cmd_simulate, Warnings, RUN_JSON};
use crate::config::{AnalysisArgs, RunConfig};
use crate::error::{exit, CliError};
use crate::output::write_json;

#[derive(Debug, Parser)]
#[command(name = "trlkit", version, about = "Transient resilience loss and county-level GLMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic input set and manifest.json.
    Simulate(SimulateArgs),
    /// Select affected regions and write regions.csv and selection.json.
    Quantify(AnalysisArgs),
    /// Build covariates and fit the model; writes covariates.csv and model.json.
    Fit(AnalysisArgs),
    /// Write histogram.csv, curves.csv and, with --boundaries, choropleth.geojson.
    Report(AnalysisArgs),
    /// quantify, fit and report in sequence.
    RunAll(AnalysisArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 36)]
    pub groups: usize,
    #[arg(long, default_value_t = 5)]
    pub per_group: usize,
}

#[derive(Serialize)]
struct RunLog<'a> {
    command: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulate: Option<SimulateLog>,
    status: String,
    exit_code: i32,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct SimulateLog {
    seed: u64,
    groups: usize,
    per_group: usize,
    rng: &'static str,
}

fn run_all(config: &RunConfig) -> Result<Warnings, CliError> {
    let mut warnings = cmd_quantify(config)?;
    let single_group = match cmd_fit(config) {
        Ok(w) => {
            warnings.extend(w);
            false
        }
        Err(CliError::SingleGroup) => true,
        Err(e) => return Err(e),
    };
    warnings.extend(cmd_report(config)?);
    if single_group {
        return Err(CliError::SingleGroup);
    }
    Ok(warnings)
}

/// Runs one parsed command. Returns the warnings and the outcome; `run.json`
/// is written whenever the command got far enough to produce outputs.
pub fn execute(command: &Command) -> (Warnings, Result<(), CliError>) {
    let (name, out, config, simulate, outcome) = match command {
        Command::Simulate(a) => {
            let sim = SimulationConfig {
                seed: a.seed,
                groups: a.groups,
                per_group: a.per_group,
            };
            let log = SimulateLog {
                seed: a.seed,
                groups: a.groups,
                per_group: a.per_group,
                rng: "ChaCha8",
            };
            ("simulate", a.out.clone(), None, Some(log), cmd_simulate(&sim, &a.out))
        }
        Command::Quantify(a) | Command::Fit(a) | Command::Report(a) | Command::RunAll(a) => {
            let config = match RunConfig::resolve(a) {
                Ok(c) => c,
                Err(e) => return (Vec::new(), Err(e)),
            };
            let (name, outcome) = match command {
                Command::Quantify(_) => ("quantify", cmd_quantify(&config)),
                Command::Fit(_) => ("fit", cmd_fit(&config)),
                Command::Report(_) => ("report", cmd_report(&config)),
                _ => ("run-all", run_all(&config)),
            };
            (name, a.out.clone(), Some(config), None, outcome)
        }
    };
    let (warnings, result) = match outcome {
        Ok(w) => (w, Ok(())),
        Err(e) => (Vec::new(), Err(e)),
    };
    let produced = matches!(result, Ok(()) | Err(CliError::SingleGroup));
    if produced {
        let code = result.as_ref().err().map_or(exit::OK, CliError::exit_code);
        let log = RunLog {
            command: name,
            version: env!("CARGO_PKG_VERSION"),
            config: config.as_ref(),
            simulate,
            status: result.as_ref().err().map_or("ok".to_string(), ToString::to_string),
            exit_code: code,
            warnings: &warnings,
        };
        if let Err(e) = write_json(&out.join(RUN_JSON), &log) {
            return (warnings, Err(e));
        }
    }
    (warnings, result)
}

/// Parses `args`, runs the command, prints warnings and errors to stderr,
/// and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let (warnings, result) = execute(&cli.command);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
