use std::path::{Path, PathBuf};

use serde::Serialize;

use chanprob_core::graph::{load_graph, save_graph, PriorPolicy};
use chanprob_core::simulator::experiment::prepare_graph;
use chanprob_core::simulator::{balance_ratio_variance, ratio_histogram, rebalance_graph, SimulationMode};
use chanprob_core::snapshot::synthetic_snapshot;

use super::{finish, input_graph, open_output};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Serialize)]
struct HistogramRow {
    bin_lo: f64,
    bin_hi: f64,
    before: u64,
    after: u64,
}

#[derive(Serialize)]
struct RebalanceSummary {
    command: &'static str,
    config_hash: String,
    seed: u64,
    channels: usize,
    variance_before: f64,
    variance_after: f64,
    channels_changed: usize,
    graph: PathBuf,
}

/// Rebalances a graph whose balances are all known and writes the result.
/// Without a graph file, the synthetic snapshot gets balances sampled from
/// the configured prior.
pub fn rebalance(cfg: &ExperimentConfig, output: &Path) -> Result<Vec<PathBuf>, CliError> {
    let before = match &cfg.graph_path {
        Some(path) => load_graph(path, &PriorPolicy::uniform())?,
        None => prepare_graph(&input_graph(cfg, &cfg.snapshot)?, SimulationMode::Static, cfg.seed).into_owned(),
    };
    let after = rebalance_graph(&before, cfg.rebalance.tolerance, cfg.rebalance.max_iterations)?;
    save_graph(&after, output)?;

    let bins = cfg.rebalance.bins;
    let (h_before, h_after) = (ratio_histogram(&before, bins), ratio_histogram(&after, bins));
    let rows: Vec<HistogramRow> = (0..bins)
        .map(|i| HistogramRow {
            bin_lo: i as f64 / bins as f64,
            bin_hi: (i + 1) as f64 / bins as f64,
            before: h_before[i],
            after: h_after[i],
        })
        .collect();
    let changed = before.channels().zip(after.channels()).filter(|((_, x), (_, y))| x.balance != y.balance).count();

    let mut out = open_output(cfg, "rebalance")?;
    out.csv("ratio_histogram.csv", &rows)?;
    out.json(
        "rebalance_summary.json",
        &RebalanceSummary {
            command: "rebalance",
            config_hash: cfg.hash(),
            seed: cfg.seed,
            channels: before.channel_count(),
            variance_before: balance_ratio_variance(&before),
            variance_after: balance_ratio_variance(&after),
            channels_changed: changed,
            graph: output.to_path_buf(),
        },
    )?;
    let mut written = finish(out);
    written.insert(0, output.to_path_buf());
    Ok(written)
}

/// Writes the synthetic snapshot, optionally with balances drawn from the
/// configured prior.
pub fn generate_snapshot(cfg: &ExperimentConfig, output: &Path, with_balances: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut g = synthetic_snapshot(&cfg.snapshot).map_err(|e| CliError::config("snapshot", e))?;
    if with_balances {
        cfg.prior.apply(&mut g).map_err(|e| CliError::config("prior", e))?;
        g = prepare_graph(&g, SimulationMode::Static, cfg.seed).into_owned();
    }
    save_graph(&g, output)?;
    Ok(vec![output.to_path_buf()])
}
