use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use chanprob_core::simulator::experiment::{infogain_curve, prepare_graph, Arm, ExperimentSpec, GainPoint};
use chanprob_core::simulator::{CachedShortestPaths, Strategy, DEFAULT_CANDIDATES};
use chanprob_core::snapshot::SnapshotParams;
use chanprob_core::ChannelGraph;

use super::{common_capacity, finish, input_graph, open_output, resolve_pairs, with_pool};
use crate::config::{ExperimentConfig, StrategyKind};
use crate::error::CliError;

#[derive(Serialize)]
struct Peak {
    parts: u32,
    percent: u32,
    median_gain_nats: f64,
}

#[derive(Serialize)]
struct Crossover {
    parts_from: u32,
    parts_to: u32,
    /// First percent at which the larger part count gains strictly less.
    percent: Option<u32>,
}

#[derive(Serialize)]
struct InfoGainSummary {
    command: &'static str,
    config_hash: String,
    seed: u64,
    capacity: u64,
    peaks: Vec<Peak>,
    crossovers: Vec<Crossover>,
}

fn reference_capacity(g: &ChannelGraph) -> u64 {
    common_capacity(g).unwrap_or_else(|| {
        let mut caps: Vec<u64> = g.channels().map(|(_, c)| c.capacity.get()).collect();
        caps.sort_unstable();
        caps[caps.len() / 2]
    })
}

fn peaks(points: &[GainPoint], parts: &[u32]) -> Vec<Peak> {
    parts
        .iter()
        .filter_map(|&k| {
            points
                .iter()
                .filter(|p| p.parts == k)
                .fold(None::<&GainPoint>, |best, p| match best {
                    Some(b) if b.median_gain_nats >= p.median_gain_nats => Some(b),
                    _ => Some(p),
                })
                .map(|p| Peak { parts: k, percent: p.percent, median_gain_nats: p.median_gain_nats })
        })
        .collect()
}

fn crossovers(points: &[GainPoint], parts: &[u32]) -> Vec<Crossover> {
    let curve = |k: u32| -> BTreeMap<u32, f64> {
        points.iter().filter(|p| p.parts == k).map(|p| (p.percent, p.median_gain_nats)).collect()
    };
    let mut sorted = parts.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .windows(2)
        .map(|w| {
            let (lo, hi) = (curve(w[0]), curve(w[1]));
            let percent = lo.iter().find(|(p, g)| hi.get(p).is_some_and(|h| h < g)).map(|(p, _)| *p);
            Crossover { parts_from: w[0], parts_to: w[1], percent }
        })
        .collect()
}

/// Median session information gain over a percent-of-capacity grid.
pub fn infogain(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let ic = &cfg.infogain;
    let snapshot = SnapshotParams { constant_capacity: Some(ic.capacity), ..cfg.snapshot.clone() };
    let g = input_graph(cfg, &snapshot)?;
    let capacity = if cfg.graph_path.is_some() { reference_capacity(&g) } else { ic.capacity };
    let percents = ic.percents.values("infogain.percents")?;
    let strategy = match ic.strategy {
        StrategyKind::Baseline => Strategy::Baseline,
        StrategyKind::MaxLikelihood => Strategy::MaximumLikelihood { candidate_count: DEFAULT_CANDIDATES },
    };
    let spec = ExperimentSpec {
        pairs: resolve_pairs(cfg, &g)?,
        amounts: Vec::new(),
        parts: ic.parts.clone(),
        mode: cfg.mode,
        max_attempts: cfg.max_attempts,
        seed: cfg.seed,
    };
    let points = with_pool(cfg, || {
        let base = prepare_graph(&g, cfg.mode, cfg.seed);
        let source = CachedShortestPaths::new(&base, strategy.candidate_count());
        infogain_curve(&base, &spec, capacity, &percents, &Arm::new(strategy.label(), strategy), &source)
    })?;

    let mut out = open_output(cfg, "infogain")?;
    out.csv("infogain.csv", &points)?;
    let summary = InfoGainSummary {
        command: "infogain",
        config_hash: cfg.hash(),
        seed: cfg.seed,
        capacity,
        peaks: peaks(&points, &ic.parts),
        crossovers: crossovers(&points, &ic.parts),
    };
    out.json("infogain_summary.json", &summary)?;
    Ok(finish(out))
}
