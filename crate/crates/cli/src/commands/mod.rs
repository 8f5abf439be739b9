mod analyze;
mod infogain;
mod rebalance;
mod simulate;

use std::path::PathBuf;

use chanprob_core::graph::{load_graph, NodeIndex};
use chanprob_core::rng::substream;
use chanprob_core::simulator::experiment::sample_pairs;
use chanprob_core::snapshot::{synthetic_snapshot, SnapshotParams};
use chanprob_core::ChannelGraph;

use crate::config::{ExperimentConfig, PairsSpec};
use crate::error::CliError;
use crate::output::OutputDir;

pub use analyze::analyze;
pub use infogain::infogain;
pub use rebalance::{generate_snapshot, rebalance};
pub use simulate::simulate;

/// Substream key for drawing the sender/receiver pairs.
const PAIRS_KEY: u64 = 0x7061_6972;

/// The configured graph file, or the synthetic snapshot, with priors applied.
pub(crate) fn input_graph(cfg: &ExperimentConfig, snapshot: &SnapshotParams) -> Result<ChannelGraph, CliError> {
    match &cfg.graph_path {
        Some(path) => Ok(load_graph(path, &cfg.prior)?),
        None => {
            let mut g = synthetic_snapshot(snapshot).map_err(|e| CliError::config("snapshot", e))?;
            cfg.prior.apply(&mut g).map_err(|e| CliError::config("prior", e))?;
            Ok(g)
        }
    }
}

/// The capacity shared by every channel, if there is one.
pub(crate) fn common_capacity(g: &ChannelGraph) -> Option<u64> {
    let mut caps = g.channels().map(|(_, c)| c.capacity.get());
    let first = caps.next()?;
    caps.all(|c| c == first).then_some(first)
}

pub(crate) fn resolve_pairs(cfg: &ExperimentConfig, g: &ChannelGraph) -> Result<Vec<(NodeIndex, NodeIndex)>, CliError> {
    match &cfg.pairs {
        PairsSpec::Count(n) => {
            if g.node_count() < 2 {
                return Err(CliError::Input("graph needs at least two nodes".into()));
            }
            Ok(sample_pairs(g, *n, &mut substream(cfg.seed, &[PAIRS_KEY])))
        }
        PairsSpec::List(list) => list
            .iter()
            .enumerate()
            .map(|(i, (s, r))| {
                let s_idx = g.node_index(s).ok_or_else(|| CliError::config(format!("pairs[{i}][0]"), format!("unknown node {s}")))?;
                let r_idx = g.node_index(r).ok_or_else(|| CliError::config(format!("pairs[{i}][1]"), format!("unknown node {r}")))?;
                if s_idx == r_idx {
                    return Err(CliError::config(format!("pairs[{i}]"), "sender and receiver coincide"));
                }
                Ok((s_idx, r_idx))
            })
            .collect(),
    }
}

pub(crate) fn with_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn open_output(cfg: &ExperimentConfig, command: &'static str) -> Result<OutputDir, CliError> {
    OutputDir::create(&cfg.output_dir, command, cfg.hash(), cfg.seed)
}

pub(crate) fn finish(out: OutputDir) -> Vec<PathBuf> {
    out.written
}
