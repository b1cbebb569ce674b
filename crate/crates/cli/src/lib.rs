//! Command-line surface for the effective portfolio size toolkit.
//!
//! Every command writes one tab-separated table (header row first) to
//! `--out` or standard output; notes and summaries go to standard error.

mod commands;
mod error;
pub mod grid;

use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use grid::{Grid, Sizes};

pub use commands::*;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "effport",
    version,
    about = "Effective portfolio size: estimates, experiments and plot tables"
)]
pub struct Cli {
    /// Output file for the main table (default: standard output).
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the return correlation matrix of a price panel.
    EstimateCorr(EstimateCorrArgs),
    /// Effective size of a correlation matrix or price panel.
    Effsize(EffsizeArgs),
    /// Average effective size over random asset subsets.
    SubsetCurve(SubsetCurveArgs),
    /// Effective size and average yearly return on sliding windows.
    Sliding(SlidingArgs),
    /// Kelly effective size, first-order versus exact, on a correlation grid.
    Fig1(Fig1Args),
    /// Realized growth when the correlation is misestimated.
    Fig2(Fig2Args),
    /// Ratio of mean constituent variance to index variance.
    VarianceRatio(VarianceRatioArgs),
    /// Write a synthetic price panel from the hidden-asset binary model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateCorrArgs {
    #[arg(long)]
    pub prices: PathBuf,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["corr", "prices"])))]
pub struct EffsizeArgs {
    /// Correlation matrix file as written by estimate-corr.
    #[arg(long)]
    pub corr: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub sectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsetCurveArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long)]
    pub sectors: Option<PathBuf>,
    /// Portfolio sizes, e.g. `2:30` or `2,5,10` (default: 2 up to the universe size).
    #[arg(long)]
    pub sizes: Option<Sizes>,
    #[arg(long, default_value_t = 5000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SlidingArgs {
    #[arg(long)]
    pub prices: PathBuf,
    /// Window length in trading days.
    #[arg(long, default_value_t = 252)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Win probabilities.
    #[arg(long, default_value = "0.55,0.6,0.7")]
    pub p: Grid,
    #[arg(long, default_value = "0:0.05:0.95")]
    pub c_grid: Grid,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0.55)]
    pub p: f64,
    /// Correlation of the market that generates outcomes.
    #[arg(long, default_value_t = 0.2)]
    pub c_true: f64,
    /// Correlations the investor assumes when sizing bets.
    #[arg(long, default_value = "0:0.05:0.6")]
    pub c_grid: Grid,
}

#[derive(Debug, Args)]
pub struct VarianceRatioArgs {
    /// Price file with a single index column.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub constituents: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Independent blocks as `size:C` pairs, e.g. `20:0.5,20:0.1`; overrides --m/--c.
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0.3)]
    pub c: f64,
    #[arg(long, default_value_t = 0.55)]
    pub p: f64,
    /// Number of simulated trading days of returns.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Daily return per unit of centered binary outcome.
    #[arg(long, default_value_t = 0.01)]
    pub scale: f64,
    /// First trading day.
    #[arg(long, default_value = "2000-01-03")]
    pub start: String,
    /// Also write the equal-weight index of all assets here.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Also write the block of each asset as a sector file here.
    #[arg(long)]
    pub sectors: Option<PathBuf>,
}

/// Runs a parsed command; notes and summaries go to `log`.
pub fn run(cli: &Cli, log: &mut dyn Write) -> CliResult<()> {
    let mut table = Vec::new();
    match &cli.command {
        Command::EstimateCorr(a) => cmd_estimate_corr(a, &mut table, log).map(drop)?,
        Command::Effsize(a) => cmd_effsize(a, &mut table, log).map(drop)?,
        Command::SubsetCurve(a) => cmd_subset_curve(a, &mut table, log).map(drop)?,
        Command::Sliding(a) => cmd_sliding(a, &mut table, log).map(drop)?,
        Command::Fig1(a) => cmd_fig1(a, &mut table, log).map(drop)?,
        Command::Fig2(a) => cmd_fig2(a, &mut table, log).map(drop)?,
        Command::VarianceRatio(a) => cmd_variance_ratio(a, &mut table, log).map(drop)?,
        Command::Simulate(a) => cmd_simulate(a, &mut table, log)?,
    }
    match &cli.out {
        Some(path) => std::fs::write(path, &table).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&table)?;
            lock.flush()?;
            Ok(())
        }
    }
}
