//! Synthetic stand-ins for a densely used core of a payment-channel network.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{ChannelGraph, GraphError};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotParams {
    pub nodes: usize,
    pub channels: usize,
    /// Median channel capacity in satoshi.
    pub capacity_median: f64,
    /// Standard deviation of the log capacity.
    pub capacity_log_sigma: f64,
    pub min_capacity: u64,
    pub max_capacity: u64,
    /// Every channel gets this capacity when set.
    pub constant_capacity: Option<u64>,
    pub seed: u64,
}

impl Default for SnapshotParams {
    fn default() -> Self {
        SnapshotParams {
            nodes: 137,
            channels: 882,
            capacity_median: 5_000_000.0,
            capacity_log_sigma: 1.0,
            min_capacity: 200_000,
            max_capacity: 100_000_000,
            constant_capacity: None,
            seed: 0,
        }
    }
}

impl SnapshotParams {
    pub fn constant(capacity: u64) -> Self {
        SnapshotParams { constant_capacity: Some(capacity), ..Self::default() }
    }
}

/// A connected graph: a random preferential-attachment tree, then extra
/// channels between distinct, not yet connected node pairs chosen with
/// probability growing with degree. Nodes are `n000`…, channels `ch0000`….
/// Balances are left unknown and priors uniform.
pub fn synthetic_snapshot(params: &SnapshotParams) -> Result<ChannelGraph, GraphError> {
    let n = params.nodes;
    let max_edges = n * n.saturating_sub(1) / 2;
    if n < 2 || params.channels + 1 < n || params.channels > max_edges {
        return Err(GraphError::Parse(format!(
            "cannot build a connected simple graph with {n} nodes and {} channels",
            params.channels
        )));
    }
    let capacities = LogNormal::new(params.capacity_median.ln(), params.capacity_log_sigma)
        .map_err(|e| GraphError::Parse(format!("capacity distribution: {e}")))?;
    let mut rng = stream(params.seed);

    let mut g = ChannelGraph::new();
    let names: Vec<String> = (0..n).map(|i| format!("n{i:03}")).collect();
    for name in &names {
        g.add_node(name.clone())?;
    }
    let mut degree = vec![0usize; n];
    let mut linked = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(params.channels);

    let pick = |degree: &[usize], upto: usize, rng: &mut crate::rng::RandomStream| -> usize {
        let total: usize = degree[..upto].iter().map(|d| d + 1).sum();
        let mut x = rng.random_range(0..total);
        for (i, d) in degree[..upto].iter().enumerate() {
            if x <= *d {
                return i;
            }
            x -= d + 1;
        }
        upto - 1
    };

    for v in 1..n {
        let u = pick(&degree, v, &mut rng);
        degree[u] += 1;
        degree[v] += 1;
        linked.insert((u, v));
        edges.push((u, v));
    }
    while edges.len() < params.channels {
        let u = pick(&degree, n, &mut rng);
        let v = pick(&degree, n, &mut rng);
        let key = (u.min(v), u.max(v));
        if u == v || !linked.insert(key) {
            continue;
        }
        degree[u] += 1;
        degree[v] += 1;
        edges.push(key);
    }

    for (i, (u, v)) in edges.into_iter().enumerate() {
        let capacity = match params.constant_capacity {
            Some(c) => c,
            None => (capacities.sample(&mut rng).round() as u64).clamp(params.min_capacity, params.max_capacity),
        };
        g.add_channel(format!("ch{i:04}"), &names[u], &names[v], capacity, None)?;
    }
    Ok(g)
}
