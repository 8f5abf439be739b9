//! The `chanprob` command line: configuration, commands and file formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use chanprob_core::simulator::SimulationMode;

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "chanprob", version, about = "Payment reliability and balance privacy in payment-channel networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the closed-form results over parameter grids.
    Analyze(Common),
    /// Run payment sessions for each arm and compare them.
    Simulate(Common),
    /// Rebalance a graph with known balances along cycles.
    Rebalance(RebalanceArgs),
    /// Median information gain per amount and number of parts.
    Infogain(Common),
    /// Write the synthetic snapshot graph.
    GenerateSnapshot(SnapshotArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Experiment config, TOML or JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Arm to run, by strategy name; repeatable. Replaces the config's arms.
    #[arg(long = "arm", value_parser = ["baseline", "max_likelihood"])]
    pub arms: Vec<String>,
    #[arg(long, value_parser = ["static", "dynamic"])]
    pub mode: Option<String>,
    /// Graph JSON; replaces the synthetic snapshot.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RebalanceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Where to write the rebalanced graph.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SnapshotArgs {
    #[command(flatten)]
    pub common: Common,
    /// Where to write the graph.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Give every channel this capacity.
    #[arg(long)]
    pub constant_capacity: Option<u64>,
    /// Also record balances drawn from the configured prior.
    #[arg(long)]
    pub with_balances: bool,
}

impl Common {
    /// Loads the config, if any, and applies flag overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(seed)) => ExperimentConfig::with_seed(seed),
            (None, None) => return Err(CliError::config("seed", "pass --seed or a --config with a seed")),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if !self.arms.is_empty() {
            cfg.arms = self
                .arms
                .iter()
                .map(|a| serde_json::from_value(serde_json::Value::String(a.clone())).map_err(|e| CliError::config("--arm", e)))
                .collect::<Result<_, _>>()?;
        }
        if let Some(m) = &self.mode {
            cfg.mode = if m == "dynamic" { SimulationMode::Dynamic } else { SimulationMode::Static };
        }
        if let Some(g) = &self.graph {
            cfg.graph_path = Some(g.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line; returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Analyze(c) => commands::analyze(&c.resolve()?),
        Command::Simulate(c) => commands::simulate(&c.resolve()?),
        Command::Infogain(c) => commands::infogain(&c.resolve()?),
        Command::Rebalance(r) => {
            let mut cfg = r.common.resolve()?;
            if let Some(t) = r.tolerance {
                cfg.rebalance.tolerance = t;
            }
            if let Some(m) = r.max_iterations {
                cfg.rebalance.max_iterations = m;
            }
            commands::rebalance(&cfg, &r.output)
        }
        Command::GenerateSnapshot(s) => {
            let mut cfg = s.common.resolve()?;
            if let Some(n) = s.nodes {
                cfg.snapshot.nodes = n;
            }
            if let Some(n) = s.channels {
                cfg.snapshot.channels = n;
            }
            if s.constant_capacity.is_some() {
                cfg.snapshot.constant_capacity = s.constant_capacity;
            }
            commands::generate_snapshot(&cfg, &s.output, s.with_balances)
        }
    }
}
