use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rbpmc::pmc::Scheme;

#[derive(Debug, Parser)]
#[command(
    name = "rbpmc",
    version,
    about = "Population Monte Carlo with Rao-Blackwellised mixture kernels"
)]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// PMC scheme: naive, single or double.
    #[arg(long, global = true, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// Print what would be done and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// More log output (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: rbpmc::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one sample with PMC.
    Run(RunArgs),
    /// Mode census of the posterior for a data file.
    Modes(ModesArgs),
    /// Run the factorial sweep and write the report tree.
    Sweep(SweepArgs),
    /// Redraw plots and curve tables from an existing report.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Fit this data file (one value per line) instead of generating a sample.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub mu2: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Particles per iteration.
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    /// Data file, one value per line.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file with the hyper-parameters (and optional prior square) for the data.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub min_prominence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A `report.json` written by `sweep`.
    #[arg(long)]
    pub report: PathBuf,
}
