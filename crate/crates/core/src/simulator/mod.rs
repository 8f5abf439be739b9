//! Payment sessions over a channel graph.
//!
//! A session delivers one payment, possibly split into equal parts, by trying
//! candidate paths until every part succeeds. In static mode balances are the
//! graph's ground truth and the sender remembers what each attempt revealed.
//! In dynamic mode every remote balance is redrawn from its prior for each
//! attempt, which makes attempts independent.

pub mod experiment;
mod rebalance;
mod strategy;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{AnalyticsError, SplitPlan};
use crate::graph::{k_shortest_paths, ChannelGraph, ChannelIndex, GraphError, NodeIndex, Path};
use crate::infogain::{observe_attempt, session_information_gain, BeliefState, InfoGainError};
use crate::model::{Amount, ModelError};

pub use rebalance::{balance_ratio_variance, ratio_histogram, rebalance_graph, RebalanceError};
pub use strategy::{next_path_baseline, next_path_max_likelihood, select_baseline, select_max_likelihood, CandidateSet};

/// Candidate paths precomputed per payment.
pub const DEFAULT_CANDIDATES: usize = 1000;
pub const DEFAULT_MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no usable candidate path")]
    NoCandidatePaths,
    #[error("every candidate path is excluded")]
    Exhausted,
    #[error("static mode needs a balance for channel {0}")]
    MissingBalance(String),
    #[error("invalid payment task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Split(#[from] AnalyticsError),
    #[error(transparent)]
    Belief(#[from] InfoGainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::Belief(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Random path among the shortest remaining ones.
    Baseline,
    /// Most probable remaining path under the sender's beliefs.
    MaximumLikelihood { candidate_count: usize },
}

impl Strategy {
    pub fn max_likelihood() -> Self {
        Strategy::MaximumLikelihood { candidate_count: DEFAULT_CANDIDATES }
    }

    /// Size of the candidate list; the baseline draws from the same list size.
    pub fn candidate_count(&self) -> usize {
        match self {
            Strategy::Baseline => DEFAULT_CANDIDATES,
            Strategy::MaximumLikelihood { candidate_count } => *candidate_count,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::MaximumLikelihood { .. } => "max_likelihood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PaymentTask {
    pub sender: NodeIndex,
    pub receiver: NodeIndex,
    pub amount: Amount,
    pub parts: u32,
}

impl PaymentTask {
    pub fn new(sender: NodeIndex, receiver: NodeIndex, amount: Amount, parts: u32) -> Result<Self, SimError> {
        let task = PaymentTask { sender, receiver, amount, parts };
        task.validate()?;
        Ok(task)
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.sender == self.receiver {
            return Err(SimError::InvalidTask("sender and receiver coincide".into()));
        }
        if self.parts == 0 || self.amount.0 < self.parts as u64 {
            return Err(SimError::InvalidTask(format!("{} cannot be split into {} parts", self.amount, self.parts)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    FailedAtHop(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub part_index: u32,
    pub path: Path,
    /// Path success probability under the beliefs held when it was sent.
    pub theoretic_success_prob: f64,
    pub outcome: Outcome,
    pub info_gain_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub task: PaymentTask,
    pub delivered: bool,
    pub attempts: Vec<AttemptRecord>,
    pub total_attempts: usize,
    pub session_info_gain: f64,
}

impl SessionResult {
    pub fn first_path_success_prob(&self) -> Option<f64> {
        self.attempts.first().map(|a| a.theoretic_success_prob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionSettings {
    pub mode: SimulationMode,
    pub strategy: Strategy,
    pub max_attempts: usize,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            mode: SimulationMode::Static,
            strategy: Strategy::max_likelihood(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Supplies the ordered candidate paths for one part amount.
pub trait PathSource: Sync {
    fn candidates(&self, g: &ChannelGraph, src: NodeIndex, dst: NodeIndex, a: Amount) -> Result<Arc<Vec<Path>>, GraphError>;
}

/// Recomputes `k_shortest_paths` on every call.
#[derive(Debug, Clone, Copy)]
pub struct ShortestPaths {
    pub k: usize,
}

impl PathSource for ShortestPaths {
    fn candidates(&self, g: &ChannelGraph, src: NodeIndex, dst: NodeIndex, a: Amount) -> Result<Arc<Vec<Path>>, GraphError> {
        k_shortest_paths(g, src, dst, self.k, a).map(Arc::new)
    }
}

/// Sender, receiver and capacity class.
type CacheKey = (NodeIndex, NodeIndex, usize);

/// Memoizes `k_shortest_paths`. Amounts falling between the same two
/// distinct capacities see the same eligible channels and share an entry.
pub struct CachedShortestPaths {
    k: usize,
    capacities: Vec<u64>,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<Path>>>>,
}

impl CachedShortestPaths {
    pub fn new(g: &ChannelGraph, k: usize) -> Self {
        let mut capacities: Vec<u64> = g.channels().map(|(_, c)| c.capacity.get()).collect();
        capacities.sort_unstable();
        capacities.dedup();
        CachedShortestPaths { k, capacities, cache: Mutex::new(HashMap::new()) }
    }
}

impl PathSource for CachedShortestPaths {
    fn candidates(&self, g: &ChannelGraph, src: NodeIndex, dst: NodeIndex, a: Amount) -> Result<Arc<Vec<Path>>, GraphError> {
        let class = self.capacities.partition_point(|&c| c < a.0);
        let key = (src, dst, class);
        if let Some(hit) = self.cache.lock().expect("path cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let paths = Arc::new(k_shortest_paths(g, src, dst, self.k, a)?);
        self.cache.lock().expect("path cache poisoned").insert(key, paths.clone());
        Ok(paths)
    }
}

/// A fixed candidate list, e.g. one forced path.
#[derive(Debug, Clone)]
pub struct FixedPaths(pub Arc<Vec<Path>>);

impl PathSource for FixedPaths {
    fn candidates(&self, g: &ChannelGraph, _src: NodeIndex, _dst: NodeIndex, a: Amount) -> Result<Arc<Vec<Path>>, GraphError> {
        let usable: Vec<Path> = self
            .0
            .iter()
            .filter(|p| p.hops.iter().all(|h| g.channel(h.channel).capacity.get() >= a.0))
            .cloned()
            .collect();
        Ok(Arc::new(usable))
    }
}

/// Runs one payment with candidates from `k_shortest_paths`.
pub fn run_payment<R: Rng + ?Sized>(
    g: &ChannelGraph,
    task: PaymentTask,
    settings: &SessionSettings,
    rng: &mut R,
) -> Result<SessionResult, SimError> {
    let source = ShortestPaths { k: settings.strategy.candidate_count() };
    run_payment_with(g, task, settings, &source, rng)
}

/// Runs one payment session.
///
/// Parts are sent one after another. A part that runs out of candidates, or
/// hitting `max_attempts`, ends the session undelivered; liquidity moved by
/// earlier parts lives only in the session and is discarded with it. If not a
/// single attempt could be made, the error is [`SimError::NoCandidatePaths`].
pub fn run_payment_with<R: Rng + ?Sized>(
    g: &ChannelGraph,
    task: PaymentTask,
    settings: &SessionSettings,
    source: &dyn PathSource,
    rng: &mut R,
) -> Result<SessionResult, SimError> {
    task.validate()?;
    let plan = SplitPlan::new(task.amount, task.parts)?;
    let is_static = settings.mode == SimulationMode::Static;

    // The sender always knows its own balances.
    let mut own = BeliefState::new();
    for &c in g.incident(task.sender) {
        let ch = g.channel(c);
        let balance = match (ch.balance, settings.mode) {
            (Some(b), _) => b,
            (None, SimulationMode::Dynamic) => ch.prior.sample(rng),
            (None, SimulationMode::Static) => return Err(SimError::MissingBalance(ch.id.0.clone())),
        };
        own.set_known_balance(g, c, balance)?;
    }

    let mut beliefs = own.clone();
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let mut dynamic_gain = 0.0;
    let mut delivered = true;

    'parts: for (part_index, amount) in plan.part_amounts().into_iter().enumerate() {
        let paths = match source.candidates(g, task.sender, task.receiver, amount) {
            Ok(p) => p,
            Err(GraphError::NoPath { .. }) => {
                if attempts.is_empty() {
                    return Err(SimError::NoCandidatePaths);
                }
                delivered = false;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let mut candidates = CandidateSet::new(g, &paths, amount, &beliefs);
        loop {
            if attempts.len() >= settings.max_attempts {
                delivered = false;
                break 'parts;
            }
            let pick = match settings.strategy {
                Strategy::Baseline => candidates.select_baseline(rng),
                Strategy::MaximumLikelihood { .. } => candidates.select_max_likelihood(g),
            };
            let Some(index) = pick else {
                if attempts.is_empty() {
                    return Err(SimError::NoCandidatePaths);
                }
                delivered = false;
                break 'parts;
            };
            let path = &paths[index];
            let theoretic_success_prob = candidates.probability(index);
            let failing_hop = if is_static {
                probe_static(g, path, amount, &beliefs)?
            } else {
                probe_dynamic(g, path, amount, &own, rng)
            };
            let info_gain_delta = if is_static {
                let delta = observe_attempt(&mut beliefs, g, path, amount, failing_hop)?;
                let reached = failing_hop.map_or(path.len(), |i| i + 1);
                candidates.refresh(g, &beliefs, path.hops[..reached].iter().map(|h| h.channel));
                delta
            } else {
                // Balances are redrawn for every attempt, so each attempt is
                // scored against the prior.
                let mut fresh = own.clone();
                let delta = observe_attempt(&mut fresh, g, path, amount, failing_hop)?;
                dynamic_gain += delta;
                delta
            };
            attempts.push(AttemptRecord {
                part_index: part_index as u32,
                path: path.clone(),
                theoretic_success_prob,
                outcome: failing_hop.map_or(Outcome::Success, Outcome::FailedAtHop),
                info_gain_delta,
            });
            if failing_hop.is_none() {
                if is_static {
                    beliefs.record_delivery(g, path, amount);
                }
                continue 'parts;
            }
        }
    }

    let session_info_gain = if is_static { session_information_gain(&beliefs) } else { dynamic_gain };
    Ok(SessionResult { task, delivered, total_attempts: attempts.len(), attempts, session_info_gain })
}

/// First hop whose ground-truth sendable balance, after this session's
/// delivered parts, is below `a`.
fn probe_static(g: &ChannelGraph, path: &Path, a: Amount, beliefs: &BeliefState) -> Result<Option<usize>, SimError> {
    for (i, hop) in path.hops.iter().enumerate() {
        let ch = g.channel(hop.channel);
        let balance = ch.balance.ok_or_else(|| SimError::MissingBalance(ch.id.0.clone()))?;
        let sendable = ch.sendable(hop.direction, balance) as i64;
        let moved = beliefs.shift(hop.channel);
        let current = match hop.direction {
            crate::graph::Direction::AToB => sendable - moved,
            crate::graph::Direction::BToA => sendable + moved,
        };
        if current < a.0 as i64 {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Like [`probe_static`] with every balance the sender does not own drawn
/// fresh from the channel prior.
fn probe_dynamic<R: Rng + ?Sized>(g: &ChannelGraph, path: &Path, a: Amount, own: &BeliefState, rng: &mut R) -> Option<usize> {
    for (i, hop) in path.hops.iter().enumerate() {
        let ch = g.channel(hop.channel);
        let ok = if is_own(g, path.source, hop.channel) {
            own.hop_success_prob(g, *hop, a) >= 1.0
        } else {
            ch.sendable(hop.direction, ch.prior.sample(rng)) >= a.0
        };
        if !ok {
            return Some(i);
        }
    }
    None
}

fn is_own(g: &ChannelGraph, node: NodeIndex, c: ChannelIndex) -> bool {
    let ch = g.channel(c);
    ch.node_a == node || ch.node_b == node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn pair(balance: u64) -> ChannelGraph {
        let mut g = ChannelGraph::new();
        g.add_node("A").unwrap();
        g.add_node("B").unwrap();
        g.add_channel("ab", "A", "B", 100, Some(balance)).unwrap();
        g
    }

    fn task(g: &ChannelGraph, from: &str, to: &str, amount: u64, parts: u32) -> PaymentTask {
        PaymentTask::new(g.node_index(from).unwrap(), g.node_index(to).unwrap(), Amount(amount), parts).unwrap()
    }

    #[test]
    fn direct_channel_delivers_in_one_attempt() {
        let g = pair(60);
        let r = run_payment(&g, task(&g, "A", "B", 50, 1), &SessionSettings::default(), &mut stream(1)).unwrap();
        assert!(r.delivered);
        assert_eq!(r.total_attempts, 1);
        assert_eq!(r.attempts[0].theoretic_success_prob, 1.0);
        assert_eq!(r.session_info_gain, 0.0);
    }

    #[test]
    fn insufficient_own_balance_consumes_no_attempt() {
        let g = pair(60);
        for strategy in [Strategy::Baseline, Strategy::max_likelihood()] {
            let settings = SessionSettings { strategy, ..Default::default() };
            let r = run_payment(&g, task(&g, "A", "B", 70, 1), &settings, &mut stream(1));
            assert!(matches!(r, Err(SimError::NoCandidatePaths)), "{r:?}");
        }
        // B holds 40 on its side.
        let r = run_payment(&g, task(&g, "B", "A", 40, 1), &SessionSettings::default(), &mut stream(1)).unwrap();
        assert!(r.delivered);
    }

    #[test]
    fn static_mode_requires_balances() {
        let mut g = pair(60);
        g.set_balance(ChannelIndex(0), None).unwrap();
        let r = run_payment(&g, task(&g, "A", "B", 10, 1), &SessionSettings::default(), &mut stream(1));
        assert!(matches!(r, Err(SimError::MissingBalance(_))));
    }

    #[test]
    fn mpp_parts_share_liquidity() {
        // Two parts of 40 over one channel holding 60: the second part fails
        // because the first consumed the liquidity.
        let g = pair(60);
        let r = run_payment(&g, task(&g, "A", "B", 80, 2), &SessionSettings::default(), &mut stream(1));
        assert!(r.is_err() || !r.as_ref().unwrap().delivered);
        let r = run_payment(&g, task(&g, "A", "B", 60, 2), &SessionSettings::default(), &mut stream(1)).unwrap();
        assert!(r.delivered);
        assert_eq!(r.total_attempts, 2);
    }

    #[test]
    fn invalid_tasks_rejected() {
        let g = pair(60);
        let a = g.node_index("A").unwrap();
        assert!(PaymentTask::new(a, a, Amount(5), 1).is_err());
        assert!(PaymentTask::new(a, g.node_index("B").unwrap(), Amount(1), 2).is_err());
    }
}
