//! Loop-free k-shortest paths by hop count.
//!
//! Paths are produced one length class at a time. Within a class a depth-first
//! walk over channels in id order emits paths already sorted by their
//! channel-id sequence, and a BFS distance table from the destination prunes
//! every prefix that cannot reach it in the remaining number of hops.

use std::collections::VecDeque;

use super::{ChannelGraph, Direction, GraphError, Hop, NodeIndex, Path};
use crate::model::Amount;

/// Up to `k` simple paths from `src` to `dst` over channels with capacity at
/// least `a`, ordered by hop count and then by channel-id sequence.
pub fn k_shortest_paths(g: &ChannelGraph, src: NodeIndex, dst: NodeIndex, k: usize, a: Amount) -> Result<Vec<Path>, GraphError> {
    let no_path = || GraphError::NoPath { src: g.node_id(src).0.clone(), dst: g.node_id(dst).0.clone(), amount: a };
    if src == dst || k == 0 {
        return Err(no_path());
    }
    let eligible = |c: super::ChannelIndex| g.channel(c).capacity.get() >= a.0;
    let dist = distances_to(g, dst, &eligible);
    let Some(shortest) = dist[src.0] else {
        return Err(no_path());
    };

    let mut out = Vec::new();
    let mut walk = Walk {
        g,
        dst,
        dist: &dist,
        eligible: &eligible,
        on_path: vec![false; g.node_count()],
        hops: Vec::new(),
        src,
        k,
        out: &mut out,
    };
    walk.on_path[src.0] = true;
    for len in shortest..g.node_count() {
        walk.extend(src, len);
        if walk.out.len() >= k {
            break;
        }
    }
    Ok(out)
}

/// Unweighted BFS distances to `dst` over eligible channels.
fn distances_to(g: &ChannelGraph, dst: NodeIndex, eligible: &dyn Fn(super::ChannelIndex) -> bool) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[dst.0] = Some(0);
    let mut queue = VecDeque::from([dst]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n.0].unwrap_or_default();
        for &c in g.incident(n) {
            if !eligible(c) {
                continue;
            }
            let ch = g.channel(c);
            let other = if ch.node_a == n { ch.node_b } else { ch.node_a };
            if dist[other.0].is_none() {
                dist[other.0] = Some(d + 1);
                queue.push_back(other);
            }
        }
    }
    dist
}

struct Walk<'a> {
    g: &'a ChannelGraph,
    dst: NodeIndex,
    dist: &'a [Option<usize>],
    eligible: &'a dyn Fn(super::ChannelIndex) -> bool,
    on_path: Vec<bool>,
    hops: Vec<Hop>,
    src: NodeIndex,
    k: usize,
    out: &'a mut Vec<Path>,
}

impl Walk<'_> {
    /// Emits every simple path from `at` reaching `dst` in exactly `remaining` hops.
    fn extend(&mut self, at: NodeIndex, remaining: usize) {
        if self.out.len() >= self.k {
            return;
        }
        if at == self.dst {
            if remaining == 0 {
                self.out.push(Path { source: self.src, hops: self.hops.clone() });
            }
            return;
        }
        if remaining == 0 {
            return;
        }
        for &c in self.g.incident(at) {
            if !(self.eligible)(c) {
                continue;
            }
            let ch = self.g.channel(c);
            let (next, direction) = if ch.node_a == at { (ch.node_b, Direction::AToB) } else { (ch.node_a, Direction::BToA) };
            if self.on_path[next.0] {
                continue;
            }
            match self.dist[next.0] {
                Some(d) if d < remaining => {}
                _ => continue,
            }
            self.on_path[next.0] = true;
            self.hops.push(Hop { channel: c, direction });
            self.extend(next, remaining - 1);
            self.hops.pop();
            self.on_path[next.0] = false;
            if self.out.len() >= self.k {
                return;
            }
        }
    }
}
