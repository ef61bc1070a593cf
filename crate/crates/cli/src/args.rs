use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use retrial_core::observable::CostAccounting;
use retrial_core::{Error, PartialParams, Result};

#[derive(Debug, Parser)]
#[command(name = "retrial", version, about = "Equilibrium and social optimum of a retrial queue with vacations and an N-policy")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Accounting {
    /// Holding cost on the orbit only.
    Orbit,
    /// Holding cost on the orbit plus the customer in service.
    System,
}

impl From<Accounting> for CostAccounting {
    fn from(a: Accounting) -> Self {
        match a {
            Accounting::Orbit => CostAccounting::Orbit,
            Accounting::System => CostAccounting::System,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML file with model parameters and run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    #[arg(long = "n-policy", global = true)]
    pub n_policy: Option<i64>,
    #[arg(long, global = true)]
    pub reward: Option<f64>,
    #[arg(long = "wait-cost", global = true)]
    pub wait_cost: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thresholds, arrival-rate equilibria and welfare for one instance.
    Compute(ComputeArgs),
    /// One row per grid point, for plotting.
    Sweep(SweepArgs),
    /// Discrete-event simulation next to the analytic values.
    Simulate(SimulateArgs),
    /// Socially optimal thresholds by particle swarm, checked against the grid.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    /// Vacation threshold of a pure strategy (with --n1).
    #[arg(long, requires = "n1")]
    pub n0: Option<usize>,
    /// Busy threshold of a pure strategy (with --n0).
    #[arg(long, requires = "n0")]
    pub n1: Option<usize>,
    /// Joining probability of the unobservable mixed strategy.
    #[arg(long, conflicts_with = "n0")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, value_enum, default_value = "orbit")]
    pub accounting: Accounting,
    /// Skip the threshold optimisation.
    #[arg(long)]
    pub no_optimum: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Preset id: 6, 7, 8, 9, 10a, 10b, 11a-11d, 12a, 12b, 13a, 13b, 14a, 14b.
    #[arg(long, conflicts_with_all = ["param", "grid"])]
    pub figure: Option<String>,
    /// Parameter to sweep (a model parameter or `q`).
    #[arg(long, requires = "grid")]
    pub param: Option<String>,
    /// Grid as `start:stop:step` or a comma-separated list.
    #[arg(long, requires = "param")]
    pub grid: Option<String>,
    /// Columns to compute, comma separated; defaults to the preset's or all.
    #[arg(long, value_delimiter = ',')]
    pub outputs: Vec<String>,
    /// List the presets and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Events per replication.
    #[arg(long, conflicts_with = "time")]
    pub events: Option<u64>,
    /// Simulated time per replication.
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Also write per-replication estimates here as CSV.
    #[arg(long)]
    pub replications_csv: Option<PathBuf>,
    /// Also write the simulated state frequencies here as CSV.
    #[arg(long)]
    pub freqs_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    /// Upper search bound for n0.
    #[arg(long)]
    pub n0_max: Option<usize>,
    /// Upper search bound for n1.
    #[arg(long)]
    pub n1_max: Option<usize>,
    #[arg(long)]
    pub swarm: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Write the global-best trace here as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Everything a config file may hold. Model keys use the parameter names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub n_policy: Option<i64>,
    pub reward: Option<f64>,
    pub wait_cost: Option<f64>,
    pub seed: Option<u64>,
    pub q: Option<f64>,
    pub n0: Option<usize>,
    pub n1: Option<usize>,
    pub events: Option<u64>,
    pub time: Option<f64>,
    pub replications: Option<usize>,
    pub warmup: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> PartialParams {
        PartialParams {
            lambda: self.lambda,
            mu: self.mu,
            theta: self.theta,
            xi: self.xi,
            n_policy: self.n_policy,
            reward: self.reward,
            wait_cost: self.wait_cost,
        }
    }
}

impl Common {
    pub fn overrides(&self) -> PartialParams {
        PartialParams {
            lambda: self.lambda,
            mu: self.mu,
            theta: self.theta,
            xi: self.xi,
            n_policy: self.n_policy,
            reward: self.reward,
            wait_cost: self.wait_cost,
        }
    }
}
