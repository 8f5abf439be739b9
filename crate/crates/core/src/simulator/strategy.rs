use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rand::Rng;

use super::SimError;
use crate::graph::{path_success_prob, ChannelGraph, ChannelIndex, Path};
use crate::infogain::BeliefState;
use crate::model::Amount;

/// Random path from the shortest length class among those `usable` admits.
pub fn select_baseline<R: Rng + ?Sized>(paths: &[Path], usable: impl Fn(usize) -> bool, rng: &mut R) -> Option<usize> {
    let shortest = (0..paths.len()).filter(|&i| usable(i)).map(|i| paths[i].len()).min()?;
    let class: Vec<usize> = (0..paths.len()).filter(|&i| paths[i].len() == shortest && usable(i)).collect();
    Some(class[rng.random_range(0..class.len())])
}

/// Most probable path with positive probability; ties go to the shorter path,
/// then to the smaller channel-id sequence.
pub fn select_max_likelihood(g: &ChannelGraph, paths: &[Path], probs: &[f64], usable: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in (0..paths.len()).filter(|&i| probs[i] > 0.0 && usable(i)) {
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = match probs[i].total_cmp(&probs[b]) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => paths[i].cmp_by_length_then_ids(&paths[b], g) == Ordering::Less,
                };
                Some(if better { i } else { b })
            }
        };
    }
    best
}

fn avoids(path: &Path, excluded: &HashSet<ChannelIndex>) -> bool {
    path.hops.iter().all(|h| !excluded.contains(&h.channel))
}

/// Baseline choice among `candidates` (ordered by length) avoiding `excluded`.
pub fn next_path_baseline<'p, R: Rng + ?Sized>(
    candidates: &'p [Path],
    excluded: &HashSet<ChannelIndex>,
    rng: &mut R,
) -> Result<&'p Path, SimError> {
    select_baseline(candidates, |i| avoids(&candidates[i], excluded), rng)
        .map(|i| &candidates[i])
        .ok_or(SimError::Exhausted)
}

/// Maximum-likelihood choice under `beliefs` avoiding `excluded`.
pub fn next_path_max_likelihood<'p>(
    g: &ChannelGraph,
    candidates: &'p [Path],
    beliefs: &BeliefState,
    a: Amount,
    excluded: &HashSet<ChannelIndex>,
) -> Result<&'p Path, SimError> {
    let probs: Vec<f64> = candidates.iter().map(|p| path_success_prob(g, p, a, beliefs)).collect();
    select_max_likelihood(g, candidates, &probs, |i| avoids(&candidates[i], excluded))
        .map(|i| &candidates[i])
        .ok_or(SimError::Exhausted)
}

/// Candidate paths for one part with their success probabilities kept in
/// step with the sender's beliefs. A path is usable while its probability is
/// positive, which drops every path through a channel known to be too dry.
pub struct CandidateSet<'p> {
    paths: &'p [Path],
    amount: Amount,
    probs: Vec<f64>,
    by_channel: HashMap<ChannelIndex, Vec<usize>>,
}

impl<'p> CandidateSet<'p> {
    pub fn new(g: &ChannelGraph, paths: &'p [Path], amount: Amount, beliefs: &BeliefState) -> Self {
        let probs = paths.iter().map(|p| path_success_prob(g, p, amount, beliefs)).collect();
        let mut by_channel: HashMap<ChannelIndex, Vec<usize>> = HashMap::new();
        for (i, p) in paths.iter().enumerate() {
            for h in &p.hops {
                by_channel.entry(h.channel).or_default().push(i);
            }
        }
        CandidateSet { paths, amount, probs, by_channel }
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn usable(&self, i: usize) -> bool {
        self.probs[i] > 0.0
    }

    /// Recomputes the paths running through `channels`.
    pub fn refresh(&mut self, g: &ChannelGraph, beliefs: &BeliefState, channels: impl Iterator<Item = ChannelIndex>) {
        for c in channels {
            if let Some(indices) = self.by_channel.get(&c) {
                for &i in indices {
                    self.probs[i] = path_success_prob(g, &self.paths[i], self.amount, beliefs);
                }
            }
        }
    }

    pub fn select_baseline<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        select_baseline(self.paths, |i| self.usable(i), rng)
    }

    pub fn select_max_likelihood(&self, g: &ChannelGraph) -> Option<usize> {
        select_max_likelihood(g, self.paths, &self.probs, |_| true)
    }
}
