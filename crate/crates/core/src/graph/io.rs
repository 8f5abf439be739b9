use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{ChannelGraph, GraphError};
use crate::model::{BalanceDistribution, PriorSpec};

/// On-disk graph: UTF-8 JSON, unknown fields ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeRecord>,
    pub channels: Vec<ChannelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub id: String,
    pub node_a: String,
    pub node_b: String,
    pub capacity: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<u64>,
}

/// Maps channel-id glob patterns to priors. The first matching override wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorPolicy {
    #[serde(default)]
    pub default: PriorSpec,
    #[serde(default)]
    pub overrides: Vec<PriorOverride>,
    /// Treat recorded balances as known to the sender.
    #[serde(default)]
    pub trust_balances: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverride {
    pub pattern: String,
    pub prior: PriorSpec,
}

impl PriorPolicy {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn apply(&self, g: &mut ChannelGraph) -> Result<(), GraphError> {
        let patterns = self
            .overrides
            .iter()
            .map(|o| {
                glob::Pattern::new(&o.pattern)
                    .map(|p| (p, &o.prior))
                    .map_err(|e| GraphError::Parse(format!("bad channel pattern {:?}: {e}", o.pattern)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let indices: Vec<_> = g.channels().map(|(i, _)| i).collect();
        for idx in indices {
            let ch = g.channel(idx);
            let prior = match (self.trust_balances, ch.balance) {
                (true, Some(b)) => BalanceDistribution::known(ch.capacity, b)?,
                _ => {
                    let spec = patterns
                        .iter()
                        .find(|(p, _)| p.matches(&ch.id.0))
                        .map(|(_, s)| *s)
                        .unwrap_or(&self.default);
                    spec.build(ch.capacity).map_err(|e| GraphError::Validation {
                        channel: ch.id.0.clone(),
                        reason: e.to_string(),
                    })?
                }
            };
            g.set_prior(idx, prior)?;
        }
        Ok(())
    }
}

impl GraphFile {
    pub fn into_graph(self, policy: &PriorPolicy) -> Result<ChannelGraph, GraphError> {
        let mut g = ChannelGraph::new();
        for n in self.nodes {
            g.add_node(n.id)?;
        }
        for c in self.channels {
            g.add_channel(c.id, &c.node_a, &c.node_b, c.capacity, c.balance)?;
        }
        policy.apply(&mut g)?;
        Ok(g)
    }

    pub fn from_graph(g: &ChannelGraph) -> Self {
        GraphFile {
            nodes: g.nodes().map(|n| NodeRecord { id: g.node_id(n).0.clone() }).collect(),
            channels: g
                .channels()
                .map(|(_, c)| ChannelRecord {
                    id: c.id.0.clone(),
                    node_a: g.node_id(c.node_a).0.clone(),
                    node_b: g.node_id(c.node_b).0.clone(),
                    capacity: c.capacity.get(),
                    balance: c.balance,
                })
                .collect(),
        }
    }
}

pub fn parse_graph(json: &str, policy: &PriorPolicy) -> Result<ChannelGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(json).map_err(|e| GraphError::Parse(e.to_string()))?;
    file.into_graph(policy)
}

/// Reads and validates a graph file.
pub fn load_graph(path: impl AsRef<FsPath>, policy: &PriorPolicy) -> Result<ChannelGraph, GraphError> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, policy)
}

pub fn save_graph(g: &ChannelGraph, path: impl AsRef<FsPath>) -> Result<(), GraphError> {
    let text = serde_json::to_string_pretty(&GraphFile::from_graph(g)).map_err(|e| GraphError::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
