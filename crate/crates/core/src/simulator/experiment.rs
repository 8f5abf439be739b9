//! Sweeps of payment sessions and their aggregates.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{run_payment_with, FixedPaths, PathSource, PaymentTask, SessionSettings, SimulationMode, Strategy};
use crate::analytics::{uniform_path_success, SplitPlan};
use crate::graph::{ChannelGraph, GraphError, NodeIndex, Path};
use crate::model::{Amount, Capacity};
use crate::rng::substream;

/// Substream key for drawing static balances once per run.
const SETUP_KEY: u64 = u64::MAX;

/// The fixed part of a sweep shared by every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub pairs: Vec<(NodeIndex, NodeIndex)>,
    pub amounts: Vec<Amount>,
    pub parts: Vec<u32>,
    pub mode: SimulationMode,
    pub max_attempts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arm {
    pub name: String,
    pub strategy: Strategy,
}

impl Arm {
    pub fn new(name: impl Into<String>, strategy: Strategy) -> Self {
        Arm { name: name.into(), strategy }
    }

    /// Stable key for the arm's random substreams.
    fn key(&self) -> u64 {
        self.name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    }
}

/// One session of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub arm: String,
    pub pair_id: usize,
    pub sender: String,
    pub receiver: String,
    pub amount: u64,
    pub parts: u32,
    pub delivered: bool,
    pub attempts: usize,
    pub session_info_gain_nats: f64,
    pub first_path_success_prob: Option<f64>,
}

/// Static mode needs ground truth. Missing balances are drawn once from the
/// priors with a stream derived from `seed`, so all arms see the same graph.
pub fn prepare_graph(g: &ChannelGraph, mode: SimulationMode, seed: u64) -> Cow<'_, ChannelGraph> {
    if mode == SimulationMode::Static && !g.all_balances_known() {
        Cow::Owned(g.with_sampled_balances(&mut substream(seed, &[SETUP_KEY])))
    } else {
        Cow::Borrowed(g)
    }
}

/// Distinct ordered sender/receiver pairs drawn without replacement.
pub fn sample_pairs<R: Rng + ?Sized>(g: &ChannelGraph, count: usize, rng: &mut R) -> Vec<(NodeIndex, NodeIndex)> {
    let n = g.node_count();
    let total = n * n.saturating_sub(1);
    sample(rng, total, count.min(total))
        .into_iter()
        .map(|i| {
            let s = i / (n - 1);
            let r = i % (n - 1);
            (NodeIndex(s), NodeIndex(if r >= s { r + 1 } else { r }))
        })
        .collect()
}

/// Runs one session per (pair, amount, parts) cell for `arm`.
///
/// Cells run in parallel on the current rayon pool; rows come back in cell
/// order and every cell owns a substream keyed by the cell and the arm, so
/// the output does not depend on the number of workers. Sessions that error
/// become undelivered rows with no attempts.
pub fn run_experiment(g: &ChannelGraph, spec: &ExperimentSpec, arm: &Arm, source: &dyn PathSource) -> Vec<ResultRow> {
    let g = prepare_graph(g, spec.mode, spec.seed);
    let g = g.as_ref();
    let settings = SessionSettings { mode: spec.mode, strategy: arm.strategy, max_attempts: spec.max_attempts };
    let cells: Vec<(usize, Amount, u32)> = spec
        .pairs
        .iter()
        .enumerate()
        .flat_map(|(p, _)| spec.amounts.iter().flat_map(move |&a| spec.parts.iter().map(move |&k| (p, a, k))))
        .collect();
    cells
        .par_iter()
        .map(|&(pair_id, amount, parts)| {
            let (sender, receiver) = spec.pairs[pair_id];
            let mut rng = substream(spec.seed, &[pair_id as u64, amount.0, parts as u64, arm.key()]);
            let result = PaymentTask::new(sender, receiver, amount, parts)
                .and_then(|task| run_payment_with(g, task, &settings, source, &mut rng));
            let mut row = ResultRow {
                arm: arm.name.clone(),
                pair_id,
                sender: g.node_id(sender).0.clone(),
                receiver: g.node_id(receiver).0.clone(),
                amount: amount.0,
                parts,
                delivered: false,
                attempts: 0,
                session_info_gain_nats: 0.0,
                first_path_success_prob: None,
            };
            if let Ok(r) = result {
                row.delivered = r.delivered;
                row.attempts = r.total_attempts;
                row.session_info_gain_nats = r.session_info_gain;
                row.first_path_success_prob = r.first_path_success_prob();
            }
            row
        })
        .collect()
}

/// Aggregates of one (amount, parts) bucket of one arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmountSummary {
    pub amount: u64,
    pub parts: u32,
    pub sessions: usize,
    pub delivered: usize,
    /// Over delivered sessions.
    pub mean_attempts: f64,
    pub median_attempts: f64,
    /// Over all sessions.
    pub mean_info_gain: f64,
    pub median_info_gain: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn summarize(rows: &[ResultRow]) -> Vec<AmountSummary> {
    let mut buckets: BTreeMap<(u64, u32), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        buckets.entry((r.amount, r.parts)).or_default().push(r);
    }
    buckets
        .into_iter()
        .map(|((amount, parts), rows)| {
            let mut attempts: Vec<f64> = rows.iter().filter(|r| r.delivered).map(|r| r.attempts as f64).collect();
            let mut gains: Vec<f64> = rows.iter().map(|r| r.session_info_gain_nats).collect();
            AmountSummary {
                amount,
                parts,
                sessions: rows.len(),
                delivered: attempts.len(),
                mean_attempts: if attempts.is_empty() { f64::NAN } else { mean(&attempts) },
                median_attempts: median(&mut attempts),
                mean_info_gain: mean(&gains),
                median_info_gain: median(&mut gains),
            }
        })
        .collect()
}

/// Two arms compared over the cells both delivered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference: String,
    pub candidate: String,
    pub buckets: Vec<BucketComparison>,
    pub paired_cells: usize,
    pub reference_mean_attempts: f64,
    pub candidate_mean_attempts: f64,
    /// `100 · (1 − candidate / reference)` over the paired cells.
    pub reduction_percent: f64,
    pub reduction_ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketComparison {
    pub amount: u64,
    pub parts: u32,
    pub cells: usize,
    pub reference_mean_attempts: f64,
    pub candidate_mean_attempts: f64,
}

/// Pairs rows of two arms run on the same spec and bootstraps the overall
/// reduction in mean attempts over cells, resampled `resamples` times.
pub fn compare_arms(reference: &[ResultRow], candidate: &[ResultRow], resamples: usize, seed: u64) -> Comparison {
    let index: BTreeMap<(usize, u64, u32), &ResultRow> = candidate.iter().map(|r| ((r.pair_id, r.amount, r.parts), r)).collect();
    let pairs: Vec<(&ResultRow, &ResultRow)> = reference
        .iter()
        .filter_map(|r| index.get(&(r.pair_id, r.amount, r.parts)).map(|c| (r, *c)))
        .filter(|(r, c)| r.delivered && c.delivered)
        .collect();

    let mut by_bucket: BTreeMap<(u64, u32), (usize, f64, f64)> = BTreeMap::new();
    for (r, c) in &pairs {
        let e = by_bucket.entry((r.amount, r.parts)).or_default();
        e.0 += 1;
        e.1 += r.attempts as f64;
        e.2 += c.attempts as f64;
    }
    let buckets = by_bucket
        .into_iter()
        .map(|((amount, parts), (n, a, b))| BucketComparison {
            amount,
            parts,
            cells: n,
            reference_mean_attempts: a / n as f64,
            candidate_mean_attempts: b / n as f64,
        })
        .collect();

    let xs: Vec<(f64, f64)> = pairs.iter().map(|(r, c)| (r.attempts as f64, c.attempts as f64)).collect();
    let reduction = |sample: &mut dyn Iterator<Item = (f64, f64)>| {
        let (a, b) = sample.fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        100.0 * (1.0 - b / a)
    };
    let point = reduction(&mut xs.iter().copied());
    let ci = if xs.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let mut rng = substream(seed, &[SETUP_KEY, 1]);
        let mut stats: Vec<f64> = (0..resamples)
            .map(|_| reduction(&mut (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())])))
            .collect();
        stats.sort_by(f64::total_cmp);
        let at = |q: f64| stats[((q * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
        (at(0.025), at(0.975))
    };
    let n = xs.len() as f64;
    Comparison {
        reference: reference.first().map(|r| r.arm.clone()).unwrap_or_default(),
        candidate: candidate.first().map(|r| r.arm.clone()).unwrap_or_default(),
        buckets,
        paired_cells: xs.len(),
        reference_mean_attempts: xs.iter().map(|p| p.0).sum::<f64>() / n,
        candidate_mean_attempts: xs.iter().map(|p| p.1).sum::<f64>() / n,
        reduction_percent: point,
        reduction_ci95: ci,
    }
}

/// Median session gain for one amount fraction and part count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainPoint {
    pub percent: u32,
    pub parts: u32,
    pub amount: u64,
    pub sessions: usize,
    pub delivered: usize,
    pub median_gain_nats: f64,
}

/// Median information gain per amount, given as a percentage of `capacity`.
/// Amounts too small to split into the requested parts report zero gain.
pub fn infogain_curve(
    g: &ChannelGraph,
    spec: &ExperimentSpec,
    capacity: u64,
    percents: &[u32],
    arm: &Arm,
    source: &dyn PathSource,
) -> Vec<GainPoint> {
    let amount_of = |p: u32| Amount(((p as u128 * capacity as u128 + 50) / 100) as u64);
    let mut amounts: Vec<Amount> = percents.iter().map(|&p| amount_of(p)).filter(|a| a.0 > 0).collect();
    amounts.dedup();
    let spec = ExperimentSpec { amounts, ..spec.clone() };
    let rows = run_experiment(g, &spec, arm, source);
    let mut out = Vec::new();
    for &k in &spec.parts {
        for &p in percents {
            let amount = amount_of(p);
            let mut gains: Vec<f64> = rows.iter().filter(|r| r.parts == k && r.amount == amount.0).map(|r| r.session_info_gain_nats).collect();
            let delivered = rows.iter().filter(|r| r.parts == k && r.amount == amount.0 && r.delivered).count();
            let sessions = gains.len();
            let median_gain_nats = if gains.is_empty() { 0.0 } else { median(&mut gains) };
            out.push(GainPoint { percent: p, parts: k, amount: amount.0, sessions, delivered, median_gain_nats });
        }
    }
    out
}

/// Dynamic-mode agreement between simulated and expected attempts on one
/// forced path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCell {
    pub hops: u32,
    pub parts: u32,
    pub percent: u32,
    pub amount: u64,
    pub sessions: usize,
    pub mean_attempts: f64,
    pub std_error: f64,
    /// Sum over the parts of `1/s(part)`.
    pub expected_attempts: f64,
}

impl ValidationCell {
    /// Distance between simulation and expectation in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean_attempts - self.expected_attempts) / self.std_error
    }
}

/// A line `S — N0 — … — Nl` whose first channel belongs to the sender and
/// whose `l` other channels have uniform priors and capacity `capacity`.
pub fn forced_line(capacity: u64, hops: u32) -> Result<(ChannelGraph, Path), GraphError> {
    let mut g = ChannelGraph::new();
    let names: Vec<String> = std::iter::once("S".to_string()).chain((0..=hops).map(|i| format!("N{i}"))).collect();
    for n in &names {
        g.add_node(n.clone())?;
    }
    for (i, w) in names.windows(2).enumerate() {
        let balance = (i == 0).then_some(capacity);
        g.add_channel(format!("c{i}"), &w[0], &w[1], capacity, balance)?;
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let path = Path::through(&g, &refs)?;
    Ok((g, path))
}

/// Runs `sessions` dynamic-mode payments of `percent`% of `capacity`, split
/// into `parts`, over a forced path with `hops` uncertain channels.
pub fn forced_path_validation(capacity: u64, hops: u32, parts: u32, percent: u32, sessions: usize, seed: u64) -> Result<ValidationCell, GraphError> {
    let (g, path) = forced_line(capacity, hops)?;
    let amount = Amount(((percent as u128 * capacity as u128 + 50) / 100) as u64);
    let source = FixedPaths(Arc::new(vec![path.clone()]));
    let settings = SessionSettings { mode: SimulationMode::Dynamic, strategy: Strategy::max_likelihood(), max_attempts: usize::MAX };
    let (sender, receiver) = (path.source, path.destination(&g));
    let counts: Vec<f64> = (0..sessions)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, &[hops as u64, parts as u64, percent as u64, i as u64]);
            PaymentTask::new(sender, receiver, amount, parts)
                .and_then(|t| run_payment_with(&g, t, &settings, &source, &mut rng))
                .map_or(f64::NAN, |r| r.total_attempts as f64)
        })
        .collect();
    let n = counts.len() as f64;
    let m = mean(&counts);
    let var = counts.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let cap = Capacity::new(capacity).map_err(|e| GraphError::Validation { channel: "c0".into(), reason: e.to_string() })?;
    let expected = SplitPlan::new(amount, parts)
        .map(|plan| {
            plan.part_amounts()
                .iter()
                .map(|p| 1.0 / uniform_path_success(p.0 as f64, cap, hops).unwrap_or(f64::NAN))
                .sum::<f64>()
        })
        .unwrap_or(f64::NAN);
    Ok(ValidationCell {
        hops,
        parts,
        percent,
        amount: amount.0,
        sessions,
        mean_attempts: m,
        std_error: (var / n).sqrt(),
        expected_attempts: expected,
    })
}
