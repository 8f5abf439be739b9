//! What the sender learns about remote balances from attempt outcomes.
//!
//! Beliefs are kept per channel over `node_a`'s balance at session start.
//! Every observation, in either direction and after any number of delivered
//! parts, is an interval event on that balance, so posteriors stay
//! restrictions of the prior and their divergence from it is exact.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{ChannelGraph, ChannelIndex, Direction, Hop, Path};
use crate::model::{Amount, BalanceDistribution, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoGainError {
    #[error("posterior puts mass where the prior has none")]
    SupportViolation,
    #[error("failing hop {index} is outside a path of {len} hops")]
    HopOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `KL(posterior || prior)` in nats.
pub fn kl_divergence(posterior: &BalanceDistribution, prior: &BalanceDistribution) -> Result<f64, InfoGainError> {
    if posterior.capacity() != prior.capacity() {
        return Err(InfoGainError::SupportViolation);
    }
    if let Some(mass) = posterior.restriction_mass_under(prior) {
        return Ok((-mass.ln()).max(0.0));
    }
    let (lo, hi) = posterior.support_bounds();
    let mut delta = 0.0;
    for b in lo..=hi {
        let q = posterior.pmf(b);
        if q <= 0.0 {
            continue;
        }
        let p = prior.pmf(b);
        if p <= 0.0 {
            return Err(InfoGainError::SupportViolation);
        }
        delta += q * (q / p).ln();
    }
    Ok(delta.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
struct ChannelBelief {
    prior: BalanceDistribution,
    posterior: BalanceDistribution,
    /// Net amount the sender has pushed `node_a -> node_b` during the session.
    shift: i64,
}

/// The sender's per-channel beliefs during one payment session.
///
/// Channels never touched read their prior straight from the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeliefState {
    channels: BTreeMap<ChannelIndex, ChannelBelief>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks a channel's balance as known exactly, e.g. one the sender owns.
    pub fn set_known_balance(&mut self, g: &ChannelGraph, c: ChannelIndex, balance: u64) -> Result<(), ModelError> {
        let known = BalanceDistribution::known(g.channel(c).capacity, balance)?;
        self.channels.insert(c, ChannelBelief { prior: known.clone(), posterior: known, shift: 0 });
        Ok(())
    }

    fn entry(&mut self, g: &ChannelGraph, c: ChannelIndex) -> &mut ChannelBelief {
        self.channels.entry(c).or_insert_with(|| {
            let prior = g.channel(c).prior.clone();
            ChannelBelief { posterior: prior.clone(), prior, shift: 0 }
        })
    }

    pub fn posterior<'a>(&'a self, g: &'a ChannelGraph, c: ChannelIndex) -> &'a BalanceDistribution {
        self.channels.get(&c).map(|b| &b.posterior).unwrap_or(&g.channel(c).prior)
    }

    pub fn prior<'a>(&'a self, g: &'a ChannelGraph, c: ChannelIndex) -> &'a BalanceDistribution {
        self.channels.get(&c).map(|b| &b.prior).unwrap_or(&g.channel(c).prior)
    }

    pub fn shift(&self, c: ChannelIndex) -> i64 {
        self.channels.get(&c).map_or(0, |b| b.shift)
    }

    /// Interval of session-start balances for which `hop` can forward `a`.
    fn success_interval(&self, g: &ChannelGraph, hop: Hop, a: Amount) -> Option<(u64, u64)> {
        let cap = g.channel(hop.channel).capacity.get() as i64;
        let shift = self.shift(hop.channel);
        let a = a.0 as i64;
        let (lo, hi) = match hop.direction {
            Direction::AToB => (a + shift, cap),
            Direction::BToA => (0, cap + shift - a),
        };
        let (lo, hi) = (lo.max(0), hi.min(cap));
        (lo <= hi).then_some((lo as u64, hi as u64))
    }

    fn failure_interval(&self, g: &ChannelGraph, hop: Hop, a: Amount) -> Option<(u64, u64)> {
        let cap = g.channel(hop.channel).capacity.get() as i64;
        let shift = self.shift(hop.channel);
        let a = a.0 as i64;
        let (lo, hi) = match hop.direction {
            Direction::AToB => (0, a + shift - 1),
            Direction::BToA => (cap + shift - a + 1, cap),
        };
        let (lo, hi) = (lo.max(0), hi.min(cap));
        (lo <= hi).then_some((lo as u64, hi as u64))
    }

    /// Probability that `hop` can currently forward `a`.
    pub fn hop_success_prob(&self, g: &ChannelGraph, hop: Hop, a: Amount) -> f64 {
        match self.success_interval(g, hop, a) {
            Some((lo, hi)) => self.posterior(g, hop.channel).mass_in(lo, hi),
            None => 0.0,
        }
    }

    /// Conditions the hop's channel on the outcome; returns the gain in nats
    /// relative to the belief just before the observation.
    pub fn observe_hop(&mut self, g: &ChannelGraph, hop: Hop, a: Amount, succeeded: bool) -> Result<f64, InfoGainError> {
        let interval = if succeeded { self.success_interval(g, hop, a) } else { self.failure_interval(g, hop, a) };
        let (lo, hi) = interval.ok_or(ModelError::ImpossibleEvent)?;
        let entry = self.entry(g, hop.channel);
        let updated = entry.posterior.restrict(lo, hi)?;
        let gain = kl_divergence(&updated, &entry.posterior)?;
        entry.posterior = updated;
        Ok(gain)
    }

    /// Records that the sender pushed `a` along `path`, moving liquidity.
    pub fn record_delivery(&mut self, g: &ChannelGraph, path: &Path, a: Amount) {
        for hop in &path.hops {
            let entry = self.entry(g, hop.channel);
            match hop.direction {
                Direction::AToB => entry.shift += a.0 as i64,
                Direction::BToA => entry.shift -= a.0 as i64,
            }
        }
    }

    /// Channels whose posterior differs from the graph prior or that carry a shift.
    pub fn touched_channels(&self) -> impl Iterator<Item = ChannelIndex> + '_ {
        self.channels.keys().copied()
    }
}

/// Applies the outcome of one attempt along `path` at amount `a`.
///
/// Hops before `failing_hop` forwarded the payment, the failing hop did not,
/// and later hops were never reached. With no failing hop every hop
/// forwarded. Returns the attempt's gain: the sum of per-hop divergences from
/// the beliefs held before the attempt.
pub fn observe_attempt(
    beliefs: &mut BeliefState,
    g: &ChannelGraph,
    path: &Path,
    a: Amount,
    failing_hop: Option<usize>,
) -> Result<f64, InfoGainError> {
    if let Some(index) = failing_hop {
        if index >= path.len() {
            return Err(InfoGainError::HopOutOfRange { index, len: path.len() });
        }
    }
    let reached = failing_hop.map_or(path.len(), |i| i + 1);
    let mut delta = 0.0;
    for (i, hop) in path.hops.iter().take(reached).enumerate() {
        let succeeded = Some(i) != failing_hop;
        delta += beliefs.observe_hop(g, *hop, a, succeeded)?;
    }
    Ok(delta)
}

/// Total gain of a session: each channel's final posterior against its
/// session-start prior, so repeatedly used channels count once.
pub fn session_information_gain(beliefs: &BeliefState) -> f64 {
    beliefs
        .channels
        .values()
        .map(|b| kl_divergence(&b.posterior, &b.prior).unwrap_or(0.0))
        .sum()
}
