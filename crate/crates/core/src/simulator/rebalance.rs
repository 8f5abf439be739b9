use thiserror::Error;

use crate::graph::{ChannelGraph, ChannelIndex, Direction, NodeIndex};

/// Longest cycle considered, in channels.
const MAX_CYCLE: usize = 5;

/// A flow may push a channel's ratio up to this far from 0.5, or leave it as
/// far as it already was, whichever is larger.
const BAND: f64 = 0.1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RebalanceError {
    #[error("channel {0} has no balance")]
    MissingBalance(String),
}

/// Circular rebalancing toward balance ratio 0.5.
///
/// Greedy: channels are visited from most to least unbalanced, and for each
/// the cycle through it (at most five channels) whose best integer flow
/// lowers `Σ (b/c − 0.5)²` the most is applied. No flow moves a channel
/// outside `0.5 ± max(0.1, its current distance from 0.5)`. Passes repeat until no cycle
/// improves the objective by more than `tolerance` or `max_iterations` flows
/// have been applied.
pub fn rebalance_graph(g: &ChannelGraph, tolerance: f64, max_iterations: usize) -> Result<ChannelGraph, RebalanceError> {
    let mut balances = Vec::with_capacity(g.channel_count());
    for (_, ch) in g.channels() {
        balances.push(ch.balance.ok_or_else(|| RebalanceError::MissingBalance(ch.id.0.clone()))?);
    }
    let caps: Vec<u64> = g.channels().map(|(_, c)| c.capacity.get()).collect();
    let mut state = Flows { g, balances, caps };

    let mut applied = 0;
    while applied < max_iterations {
        let mut order: Vec<usize> = (0..state.balances.len()).collect();
        order.sort_by(|&x, &y| state.deviation(y).abs().total_cmp(&state.deviation(x).abs()).then(x.cmp(&y)));
        let mut improved = false;
        for e in order {
            if applied >= max_iterations {
                break;
            }
            if let Some((cycle, flow, gain)) = state.best_cycle_through(ChannelIndex(e)) {
                if gain > tolerance {
                    state.apply(&cycle, flow);
                    applied += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut out = g.clone();
    for (i, b) in state.balances.into_iter().enumerate() {
        out.set_balance(ChannelIndex(i), Some(b)).expect("flows respect capacity");
    }
    Ok(out)
}

struct Flows<'g> {
    g: &'g ChannelGraph,
    balances: Vec<u64>,
    caps: Vec<u64>,
}

/// A channel traversed by the cycle; `AToB` lowers node_a's balance.
type CycleHop = (ChannelIndex, Direction);

impl Flows<'_> {
    fn deviation(&self, i: usize) -> f64 {
        self.balances[i] as f64 / self.caps[i] as f64 - 0.5
    }

    /// Room for flow along the hop.
    fn room(&self, (c, d): CycleHop) -> u64 {
        match d {
            Direction::AToB => self.balances[c.0],
            Direction::BToA => self.caps[c.0] - self.balances[c.0],
        }
    }

    /// Largest flow along the hop that keeps the channel inside its band.
    fn limit(&self, (c, d): CycleHop) -> u64 {
        let dev = self.deviation(c.0);
        let reach = dev.abs().max(BAND);
        let cap = self.caps[c.0] as f64;
        let bound = match d {
            Direction::AToB => cap * (dev + reach),
            Direction::BToA => cap * (reach - dev),
        };
        (bound.max(0.0).floor() as u64).min(self.room((c, d)))
    }

    /// Objective decrease when `flow` moves around `cycle`.
    fn gain(&self, cycle: &[CycleHop], flow: u64) -> f64 {
        cycle
            .iter()
            .map(|&(c, d)| {
                let before = self.deviation(c.0);
                let step = flow as f64 / self.caps[c.0] as f64;
                let after = match d {
                    Direction::AToB => before - step,
                    Direction::BToA => before + step,
                };
                before * before - after * after
            })
            .sum()
    }

    /// Best integer flow around `cycle` and its gain.
    fn line_search(&self, cycle: &[CycleHop]) -> Option<(u64, f64)> {
        let room = cycle.iter().map(|&h| self.limit(h)).min()?;
        if room == 0 {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(c, d) in cycle {
            let sign = if d == Direction::AToB { 1.0 } else { -1.0 };
            let cap = self.caps[c.0] as f64;
            num += sign * self.deviation(c.0) / cap;
            den += 1.0 / (cap * cap);
        }
        let target = (num / den).clamp(0.0, room as f64);
        [target.floor() as u64, target.ceil() as u64]
            .into_iter()
            .filter(|&f| f > 0)
            .map(|f| (f, self.gain(cycle, f)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
    }

    /// The most improving cycle that moves flow over `e` in the direction
    /// bringing it toward 0.5.
    fn best_cycle_through(&self, e: ChannelIndex) -> Option<(Vec<CycleHop>, u64, f64)> {
        let ch = self.g.channel(e);
        let dir = if self.deviation(e.0) > 0.0 { Direction::AToB } else { Direction::BToA };
        if self.room((e, dir)) == 0 {
            return None;
        }
        let (start, end) = (ch.sender(dir), ch.receiver(dir));
        let mut search = CycleSearch {
            flows: self,
            first: e,
            start,
            on_path: vec![false; self.g.node_count()],
            cycle: vec![(e, dir)],
            best: None,
        };
        search.on_path[end.0] = true;
        search.on_path[start.0] = true;
        search.extend(end);
        search.best
    }

    fn apply(&mut self, cycle: &[CycleHop], flow: u64) {
        for &(c, d) in cycle {
            match d {
                Direction::AToB => self.balances[c.0] -= flow,
                Direction::BToA => self.balances[c.0] += flow,
            }
        }
    }
}

struct CycleSearch<'a, 'g> {
    flows: &'a Flows<'g>,
    first: ChannelIndex,
    start: NodeIndex,
    on_path: Vec<bool>,
    cycle: Vec<CycleHop>,
    best: Option<(Vec<CycleHop>, u64, f64)>,
}

impl CycleSearch<'_, '_> {
    fn extend(&mut self, at: NodeIndex) {
        let g = self.flows.g;
        for &c in g.incident(at) {
            if c == self.first {
                continue;
            }
            let ch = g.channel(c);
            let (next, dir) = if ch.node_a == at { (ch.node_b, Direction::AToB) } else { (ch.node_a, Direction::BToA) };
            if self.flows.room((c, dir)) == 0 {
                continue;
            }
            if next == self.start {
                self.cycle.push((c, dir));
                if let Some((flow, gain)) = self.flows.line_search(&self.cycle) {
                    if self.best.as_ref().is_none_or(|b| gain > b.2) {
                        self.best = Some((self.cycle.clone(), flow, gain));
                    }
                }
                self.cycle.pop();
                continue;
            }
            if self.on_path[next.0] || self.cycle.len() + 1 >= MAX_CYCLE {
                continue;
            }
            self.on_path[next.0] = true;
            self.cycle.push((c, dir));
            self.extend(next);
            self.cycle.pop();
            self.on_path[next.0] = false;
        }
    }
}

/// Counts of balance ratios `b/c` in `bins` equal-width bins over [0, 1];
/// ratio 1 falls in the last bin. Channels without balance are skipped.
pub fn ratio_histogram(g: &ChannelGraph, bins: usize) -> Vec<u64> {
    let mut counts = vec![0; bins];
    for (_, ch) in g.channels() {
        if let Some(r) = ch.balance_ratio() {
            let i = ((r * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    counts
}

/// Population variance of the balance ratios.
pub fn balance_ratio_variance(g: &ChannelGraph) -> f64 {
    let ratios: Vec<f64> = g.channels().filter_map(|(_, c)| c.balance_ratio()).collect();
    if ratios.is_empty() {
        return 0.0;
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n
}
