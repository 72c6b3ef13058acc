//! `aedtrace`: batch pipelines over AED-retrieval trips.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "aedtrace", version, about = "AED-retrieval trip analytics")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 2 when any warning was produced.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort (trips, truth, surveys, session logs) and a labelled feature corpus.
    Simulate(SimulateArgs),
    /// Split, oversample and train the pausing classifier.
    Train(TrainArgs),
    /// Score a model on labelled feature windows.
    Evaluate(EvaluateArgs),
    /// Segment every trip under a data directory.
    Segment(SegmentArgs),
    /// Pair pre/post exam trips into participant outcomes.
    Metrics(MetricsArgs),
    /// Run the comparison tests and write a statistics report.
    Stats(StatsArgs),
    /// Replay a session event log through the state machine.
    SessionReplay(ReplayArgs),
    /// Render a statistics report as text or CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Participants in the cohort.
    #[arg(long)]
    pub cohort: Option<usize>,
    /// Post-exam scale on path length, prep and pause time, in (0, 1].
    #[arg(long)]
    pub factor: Option<f64>,
    /// Trips in the classifier corpus; 0 skips it.
    #[arg(long)]
    pub corpus: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Directory holding one sub-directory per trip.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub beacon_rssi: Option<f64>,
    #[arg(long)]
    pub dwell: Option<u32>,
    #[arg(long)]
    pub wifi_rssi: Option<f64>,
    #[arg(long)]
    pub confirm: Option<u32>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsInputs {
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long)]
    pub surveys: Option<PathBuf>,
    #[arg(long)]
    pub sus: Option<PathBuf>,
    /// Seed for bootstrap intervals.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub inputs: StatsInputs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// One JSON event per line.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Defaults to the event file name without extension.
    #[arg(long)]
    pub participant: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Txt,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `stat_report.json` written by `stats`; otherwise the report is built from outcomes.
    #[arg(long, conflicts_with = "outcomes")]
    pub stat_report: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: StatsInputs,
    #[arg(long, value_enum, default_value_t = Format::Txt)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
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
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} warning(s) with --strict");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns the number of warnings that `--strict` escalates.
fn run(cli: Cli) -> anyhow::Result<usize> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let warnings = match cli.command {
        Command::Simulate(a) => commands::simulate(a, &mut cfg)?,
        Command::Train(a) => commands::train(a, &mut cfg)?,
        Command::Evaluate(a) => commands::evaluate(a, &mut cfg)?,
        Command::Segment(a) => commands::segment(a, &mut cfg)?,
        Command::Metrics(a) => commands::metrics(a, &mut cfg)?,
        Command::Stats(a) => commands::stats(a, &mut cfg)?,
        Command::SessionReplay(a) => commands::session_replay(a, &mut cfg)?,
        Command::Report(a) => commands::report(a, &mut cfg)?,
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(if cli.strict { warnings.len() } else { 0 })
}
