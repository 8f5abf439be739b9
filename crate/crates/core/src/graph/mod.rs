//! Channel graph, directed paths and path success probability.

mod io;
mod paths;

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infogain::BeliefState;
use crate::model::{Amount, BalanceDistribution, Capacity, ModelError, PriorSpec};

pub use io::{load_graph, parse_graph, save_graph, ChannelRecord, GraphFile, NodeRecord, PriorOverride, PriorPolicy};
pub use paths::k_shortest_paths;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph file: {0}")]
    Parse(String),
    #[error("invalid channel {channel}: {reason}")]
    Validation { channel: String, reason: String },
    #[error("invalid node {node}: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("no path between {src} and {dst} at amount {amount}")]
    NoPath { src: String, dst: String, amount: Amount },
    #[error("invalid prior: {0}")]
    Prior(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(pub String);

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dense index of a node inside one [`ChannelGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIndex(pub usize);

/// Dense index of a channel inside one [`ChannelGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelIndex(pub usize);

/// Which endpoint sends when a hop traverses a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// `node_a` pays `node_b`; spends the recorded balance.
    AToB,
    /// `node_b` pays `node_a`; spends `capacity - balance`.
    BToA,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub id: ChannelId,
    pub node_a: NodeIndex,
    pub node_b: NodeIndex,
    pub capacity: Capacity,
    /// Balance held by `node_a`, when known to the simulator.
    pub balance: Option<u64>,
    /// The sender's prior over `balance`.
    pub prior: BalanceDistribution,
}

impl Channel {
    pub fn sender(&self, dir: Direction) -> NodeIndex {
        match dir {
            Direction::AToB => self.node_a,
            Direction::BToA => self.node_b,
        }
    }

    pub fn receiver(&self, dir: Direction) -> NodeIndex {
        match dir {
            Direction::AToB => self.node_b,
            Direction::BToA => self.node_a,
        }
    }

    /// Funds the sending side can forward, given `node_a`'s balance.
    pub fn sendable(&self, dir: Direction, balance_a: u64) -> u64 {
        match dir {
            Direction::AToB => balance_a,
            Direction::BToA => self.capacity.get() - balance_a,
        }
    }

    /// Ratio of `node_a`'s balance to capacity, if the balance is known.
    pub fn balance_ratio(&self) -> Option<f64> {
        self.balance.map(|b| b as f64 / self.capacity.get() as f64)
    }
}

/// Immutable-after-load topology with capacities, optional balances and priors.
#[derive(Debug, Clone, Default)]
pub struct ChannelGraph {
    nodes: Vec<NodeId>,
    node_lookup: HashMap<NodeId, NodeIndex>,
    channels: Vec<Channel>,
    channel_lookup: HashMap<ChannelId, ChannelIndex>,
    /// Incident channels per node, ordered by channel id.
    adjacency: Vec<Vec<ChannelIndex>>,
}

impl ChannelGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<String>) -> Result<NodeIndex, GraphError> {
        let id = NodeId(id.into());
        if id.0.is_empty() {
            return Err(GraphError::InvalidNode { node: id.0, reason: "empty node id".into() });
        }
        if self.node_lookup.contains_key(&id) {
            return Err(GraphError::InvalidNode { node: id.0, reason: "duplicate node id".into() });
        }
        let idx = NodeIndex(self.nodes.len());
        self.node_lookup.insert(id.clone(), idx);
        self.nodes.push(id);
        self.adjacency.push(Vec::new());
        Ok(idx)
    }

    /// Adds a channel with a uniform prior.
    pub fn add_channel(
        &mut self,
        id: impl Into<String>,
        node_a: &str,
        node_b: &str,
        capacity: u64,
        balance: Option<u64>,
    ) -> Result<ChannelIndex, GraphError> {
        let id = ChannelId(id.into());
        let invalid = |reason: String| GraphError::Validation { channel: id.0.clone(), reason };
        if id.0.is_empty() {
            return Err(invalid("empty channel id".into()));
        }
        if self.channel_lookup.contains_key(&id) {
            return Err(invalid("duplicate channel id".into()));
        }
        let a = self.node_index(node_a).ok_or_else(|| invalid(format!("unknown endpoint {node_a}")))?;
        let b = self.node_index(node_b).ok_or_else(|| invalid(format!("unknown endpoint {node_b}")))?;
        if a == b {
            return Err(invalid("both endpoints are the same node".into()));
        }
        let capacity = Capacity::new(capacity).map_err(|e| invalid(e.to_string()))?;
        if let Some(bal) = balance {
            if bal > capacity.get() {
                return Err(invalid(format!("balance {bal} exceeds capacity {capacity}")));
            }
        }
        let idx = ChannelIndex(self.channels.len());
        self.channels.push(Channel {
            id: id.clone(),
            node_a: a,
            node_b: b,
            capacity,
            balance,
            prior: BalanceDistribution::uniform(capacity),
        });
        self.channel_lookup.insert(id, idx);
        for n in [a, b] {
            let adj = &mut self.adjacency[n.0];
            let pos = adj.partition_point(|c| self.channels[c.0].id < self.channels[idx.0].id);
            adj.insert(pos, idx);
        }
        Ok(idx)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn node_id(&self, n: NodeIndex) -> &NodeId {
        &self.nodes[n.0]
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIndex> {
        self.node_lookup.get(&NodeId(id.to_owned())).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.nodes.len()).map(NodeIndex)
    }

    pub fn channel(&self, c: ChannelIndex) -> &Channel {
        &self.channels[c.0]
    }

    pub fn channel_index(&self, id: &str) -> Option<ChannelIndex> {
        self.channel_lookup.get(&ChannelId(id.to_owned())).copied()
    }

    pub fn channels(&self) -> impl Iterator<Item = (ChannelIndex, &Channel)> + '_ {
        self.channels.iter().enumerate().map(|(i, c)| (ChannelIndex(i), c))
    }

    /// Channels touching `n`, ordered by channel id.
    pub fn incident(&self, n: NodeIndex) -> &[ChannelIndex] {
        &self.adjacency[n.0]
    }

    pub fn set_prior(&mut self, c: ChannelIndex, prior: BalanceDistribution) -> Result<(), GraphError> {
        let ch = &mut self.channels[c.0];
        if prior.capacity() != ch.capacity {
            return Err(GraphError::Validation {
                channel: ch.id.0.clone(),
                reason: format!("prior capacity {} differs from channel capacity {}", prior.capacity(), ch.capacity),
            });
        }
        ch.prior = prior;
        Ok(())
    }

    /// Rebuilds every channel's prior from `spec`.
    pub fn set_all_priors(&mut self, spec: &PriorSpec) -> Result<(), GraphError> {
        for ch in &mut self.channels {
            ch.prior = spec.build(ch.capacity).map_err(|e| GraphError::Validation {
                channel: ch.id.0.clone(),
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn set_balance(&mut self, c: ChannelIndex, balance: Option<u64>) -> Result<(), GraphError> {
        let ch = &mut self.channels[c.0];
        if let Some(b) = balance {
            if b > ch.capacity.get() {
                return Err(GraphError::Validation {
                    channel: ch.id.0.clone(),
                    reason: format!("balance {b} exceeds capacity {}", ch.capacity),
                });
            }
        }
        ch.balance = balance;
        Ok(())
    }

    /// Copy of the graph where every channel without a balance gets one drawn
    /// from its prior.
    pub fn with_sampled_balances<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelGraph {
        let mut g = self.clone();
        for ch in &mut g.channels {
            if ch.balance.is_none() {
                ch.balance = Some(ch.prior.sample(rng));
            }
        }
        g
    }

    pub fn all_balances_known(&self) -> bool {
        self.channels.iter().all(|c| c.balance.is_some())
    }

    /// Sum of `n`'s own side of every incident channel. `None` if a balance is unknown.
    pub fn node_balance(&self, n: NodeIndex) -> Option<u64> {
        self.incident(n)
            .iter()
            .map(|&c| {
                let ch = self.channel(c);
                let dir = if ch.node_a == n { Direction::AToB } else { Direction::BToA };
                ch.balance.map(|b| ch.sendable(dir, b))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hop {
    pub channel: ChannelIndex,
    pub direction: Direction,
}

/// A directed, loop-free sequence of hops starting at `source`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub source: NodeIndex,
    pub hops: Vec<Hop>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn destination(&self, g: &ChannelGraph) -> NodeIndex {
        self.hops
            .last()
            .map(|h| g.channel(h.channel).receiver(h.direction))
            .unwrap_or(self.source)
    }

    /// Builds a path from a node sequence, picking the channel with the
    /// smallest id between consecutive nodes.
    pub fn through(g: &ChannelGraph, nodes: &[&str]) -> Result<Path, GraphError> {
        let idx: Vec<NodeIndex> = nodes
            .iter()
            .map(|n| g.node_index(n).ok_or_else(|| GraphError::UnknownNode((*n).to_owned())))
            .collect::<Result<_, _>>()?;
        let source = *idx.first().ok_or_else(|| GraphError::Parse("empty node sequence".into()))?;
        let mut hops = Vec::with_capacity(idx.len().saturating_sub(1));
        for w in idx.windows(2) {
            let hop = g
                .incident(w[0])
                .iter()
                .find_map(|&c| {
                    let ch = g.channel(c);
                    if ch.node_a == w[0] && ch.node_b == w[1] {
                        Some(Hop { channel: c, direction: Direction::AToB })
                    } else if ch.node_b == w[0] && ch.node_a == w[1] {
                        Some(Hop { channel: c, direction: Direction::BToA })
                    } else {
                        None
                    }
                })
                .ok_or_else(|| GraphError::NoPath {
                    src: g.node_id(w[0]).0.clone(),
                    dst: g.node_id(w[1]).0.clone(),
                    amount: Amount(0),
                })?;
            hops.push(hop);
        }
        let p = Path { source, hops };
        p.validate(g)?;
        Ok(p)
    }

    /// Checks contiguity, that no node repeats, and that channels exist.
    pub fn validate(&self, g: &ChannelGraph) -> Result<(), GraphError> {
        let mut at = self.source;
        let mut seen = vec![self.source];
        for hop in &self.hops {
            if hop.channel.0 >= g.channel_count() {
                return Err(GraphError::Parse(format!("channel index {} out of range", hop.channel.0)));
            }
            let ch = g.channel(hop.channel);
            if ch.sender(hop.direction) != at {
                return Err(GraphError::Validation {
                    channel: ch.id.0.clone(),
                    reason: "hop does not continue from the previous node".into(),
                });
            }
            at = ch.receiver(hop.direction);
            if seen.contains(&at) {
                return Err(GraphError::Validation { channel: ch.id.0.clone(), reason: "path revisits a node".into() });
            }
            seen.push(at);
        }
        Ok(())
    }

    /// Channel ids along the path; the tie-break key between equal-length paths.
    pub fn channel_ids<'g>(&self, g: &'g ChannelGraph) -> Vec<&'g ChannelId> {
        self.hops.iter().map(|h| &g.channel(h.channel).id).collect()
    }

    /// Orders paths by hop count, then by channel-id sequence.
    pub fn cmp_by_length_then_ids(&self, other: &Path, g: &ChannelGraph) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            self.hops
                .iter()
                .zip(&other.hops)
                .map(|(x, y)| g.channel(x.channel).id.cmp(&g.channel(y.channel).id))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

/// Success probability `s(a)` of `path` under the sender's current beliefs:
/// the product of the per-hop probabilities. Channels the sender owns are
/// known exactly, so they contribute a factor of either 0 or 1.
pub fn path_success_prob(g: &ChannelGraph, path: &Path, a: Amount, beliefs: &BeliefState) -> f64 {
    let mut s = 1.0;
    for hop in &path.hops {
        s *= beliefs.hop_success_prob(g, *hop, a);
        if s == 0.0 {
            break;
        }
    }
    s
}

/// Number `l` of hops with a balance unknown to the path's source.
pub fn uncertain_hop_count(g: &ChannelGraph, path: &Path) -> usize {
    path.hops
        .iter()
        .filter(|h| {
            let ch = g.channel(h.channel);
            let own = ch.node_a == path.source || ch.node_b == path.source;
            !own && !matches!(ch.prior, BalanceDistribution::Degenerate { .. })
        })
        .count()
}
