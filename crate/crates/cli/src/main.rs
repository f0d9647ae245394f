//! `qburst`: simulate outcome streams, detect bursts and report rates.
//!
//! Every run writes a JSON manifest with the canonical arguments and the
//! SHA-256 of each input and output; `qburst replay` re-executes one and checks
//! that the outputs come out identical.

mod detect;
mod failure;
mod manifest;
mod report;
mod sim;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::{Failure, Outcome};
use manifest::{hash_file, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "qburst", version, about = "Correlated qubit-error burst pipelines")]
struct Cli {
    /// Print a human-readable summary instead of the run manifest.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an acquisition from a scenario file.
    Sim(sim::SimArgs),
    /// Detect and classify bursts in a QOB file.
    Detect(detect::DetectArgs),
    /// Rates, cumulative counts and averaged traces from an events CSV.
    Report(report::ReportArgs),
    /// Re-run a recorded manifest and check the outputs are unchanged.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
struct ReplayArgs {
    #[arg(long = "manifest-path", visible_alias = "manifest")]
    manifest_path: PathBuf,
}

fn execute(command: &Command, pretty: bool) -> Outcome<RunManifest> {
    let (manifest, summary) = match command {
        Command::Sim(a) => sim::run(a)?,
        Command::Detect(a) => detect::run(a)?,
        Command::Report(a) => report::run(a)?,
        Command::Replay(a) => return replay(a, pretty),
    };
    if pretty {
        print!("{}", table::render(&summary));
    } else {
        print!("{}", manifest.to_json());
    }
    Ok(manifest)
}

fn replay(a: &ReplayArgs, pretty: bool) -> Outcome<RunManifest> {
    let recorded = RunManifest::read(&a.manifest_path)?;
    for input in &recorded.inputs {
        let now = hash_file(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(Failure::io(anyhow::anyhow!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let argv = std::iter::once("qburst".to_string())
        .chain(std::iter::once(recorded.subcommand.clone()))
        .chain(recorded.argv.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Failure::usage(anyhow::anyhow!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::usage(anyhow::anyhow!("a manifest cannot replay another replay")));
    }
    let fresh = execute(&cli.command, pretty)?;
    for (old, new) in recorded.outputs.iter().zip(&fresh.outputs) {
        if old != new {
            return Err(Failure::io(anyhow::anyhow!("output {} differs from the recorded run", new.path.display())));
        }
    }
    if recorded.outputs.len() != fresh.outputs.len() {
        return Err(Failure::io(anyhow::anyhow!("replay produced a different set of outputs")));
    }
    Ok(fresh)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::EXIT_USAGE } else { 0 });
        }
    };
    match execute(&cli.command, cli.pretty) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
