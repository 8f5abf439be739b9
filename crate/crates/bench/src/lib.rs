//! Fixtures shared by the benchmarks in `benches/`.

use chanprob_core::rng::stream;
use chanprob_core::simulator::experiment::{prepare_graph, sample_pairs};
use chanprob_core::snapshot::{synthetic_snapshot, SnapshotParams};
use chanprob_core::{ChannelGraph, NodeIndex, SimulationMode};

/// The default snapshot with static balances drawn for `seed`.
pub fn snapshot(seed: u64) -> ChannelGraph {
    let g = synthetic_snapshot(&SnapshotParams::default()).expect("default snapshot");
    prepare_graph(&g, SimulationMode::Static, seed).into_owned()
}

/// `n` sender/receiver pairs on `g`.
pub fn pairs(g: &ChannelGraph, n: usize) -> Vec<(NodeIndex, NodeIndex)> {
    sample_pairs(g, n, &mut stream(7))
}
