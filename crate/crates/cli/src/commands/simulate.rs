use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use chanprob_core::simulator::experiment::{
    compare_arms, forced_path_validation, median, prepare_graph, run_experiment, summarize, AmountSummary, Arm, Comparison,
    ExperimentSpec, ResultRow, ValidationCell,
};
use chanprob_core::simulator::{balance_ratio_variance, rebalance_graph, CachedShortestPaths, SimulationMode};
use chanprob_core::{Amount, ChannelGraph};

use super::{common_capacity, finish, input_graph, open_output, resolve_pairs, with_pool};
use crate::config::{ArmTable, ExperimentConfig};
use crate::error::CliError;

/// Bootstrap resamples behind the reported confidence interval.
const BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Serialize)]
struct ArmSummary {
    sessions: usize,
    delivered: usize,
    mean_attempts: f64,
    median_attempts: f64,
    mean_info_gain: f64,
    per_amount: Vec<AmountSummary>,
}

#[derive(Serialize)]
struct RebalanceSummary {
    variance_before: f64,
    variance_after: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    command: &'static str,
    config_hash: String,
    seed: u64,
    mode: SimulationMode,
    /// `posterior` in static mode; `per_attempt_sum` in dynamic mode, where
    /// beliefs restart from the prior at every attempt.
    info_gain_method: &'static str,
    arms: BTreeMap<String, ArmSummary>,
    /// Every other arm against the first.
    comparisons: Vec<Comparison>,
    /// Reduction of the second arm against the first, in percent.
    reduction_percent: Option<f64>,
    rebalancing: Option<RebalanceSummary>,
}

fn arm_summary(rows: &[ResultRow]) -> ArmSummary {
    let mut attempts: Vec<f64> = rows.iter().filter(|r| r.delivered).map(|r| r.attempts as f64).collect();
    let delivered = attempts.len();
    ArmSummary {
        sessions: rows.len(),
        delivered,
        mean_attempts: attempts.iter().sum::<f64>() / delivered as f64,
        median_attempts: median(&mut attempts),
        mean_info_gain: rows.iter().map(|r| r.session_info_gain_nats).sum::<f64>() / rows.len() as f64,
        per_amount: summarize(rows),
    }
}

/// Runs every arm over the configured cells, or the forced-path validation
/// when `force_path` is set.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    if cfg.force_path.is_some() {
        return validate_forced(cfg);
    }
    let arms: Vec<ArmTable> = cfg.arms.iter().map(|a| a.table()).collect();
    let needs_rebalance = arms.iter().any(|a| a.rebalanced);
    if needs_rebalance && cfg.mode == SimulationMode::Dynamic {
        return Err(CliError::config("arms", "rebalanced arms need static mode"));
    }

    let g = input_graph(cfg, &cfg.snapshot)?;
    let pairs = resolve_pairs(cfg, &g)?;
    let amounts: Vec<Amount> = cfg.amounts.satoshi(common_capacity(&g))?.into_iter().map(Amount).collect();
    let spec = ExperimentSpec {
        pairs,
        amounts,
        parts: cfg.parts.clone(),
        mode: cfg.mode,
        max_attempts: cfg.max_attempts,
        seed: cfg.seed,
    };

    let (rows, rebalancing) = with_pool(cfg, || -> Result<_, CliError> {
        let base = prepare_graph(&g, cfg.mode, cfg.seed).into_owned();
        let rebalanced = if needs_rebalance {
            Some(rebalance_graph(&base, cfg.rebalance.tolerance, cfg.rebalance.max_iterations)?)
        } else {
            None
        };
        let mut sources: BTreeMap<usize, CachedShortestPaths> = BTreeMap::new();
        let mut all = Vec::new();
        for arm in &arms {
            let strategy = arm.strategy();
            let k = strategy.candidate_count();
            let source = sources.entry(k).or_insert_with(|| CachedShortestPaths::new(&base, k));
            let graph = if arm.rebalanced { rebalanced.as_ref().unwrap_or(&base) } else { &base };
            let graph: std::borrow::Cow<ChannelGraph> = match &arm.prior {
                Some(p) => {
                    let mut owned = graph.clone();
                    owned.set_all_priors(p).map_err(|e| CliError::config("arms.prior", e))?;
                    std::borrow::Cow::Owned(owned)
                }
                None => std::borrow::Cow::Borrowed(graph),
            };
            all.push(run_experiment(&graph, &spec, &Arm::new(arm.name(), strategy), source));
        }
        let summary = rebalanced.as_ref().map(|r| RebalanceSummary {
            variance_before: balance_ratio_variance(&base),
            variance_after: balance_ratio_variance(r),
        });
        Ok((all, summary))
    })??;

    let mut out = open_output(cfg, "simulate")?;
    let flat: Vec<ResultRow> = rows.iter().flatten().cloned().collect();
    out.csv("results.csv", &flat)?;

    let comparisons: Vec<Comparison> =
        rows.iter().skip(1).map(|r| compare_arms(&rows[0], r, BOOTSTRAP_RESAMPLES, cfg.seed)).collect();
    let summary = SimulateSummary {
        command: "simulate",
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mode: cfg.mode,
        info_gain_method: match cfg.mode {
            SimulationMode::Static => "posterior",
            SimulationMode::Dynamic => "per_attempt_sum",
        },
        arms: arms.iter().zip(&rows).map(|(a, r)| (a.name(), arm_summary(r))).collect(),
        reduction_percent: comparisons.first().map(|c| c.reduction_percent),
        comparisons,
        rebalancing,
    };
    out.json("summary.json", &summary)?;
    Ok(finish(out))
}

#[derive(Serialize)]
struct ValidationRow {
    hops: u32,
    parts: u32,
    percent: u32,
    amount: u64,
    sessions: usize,
    mean_attempts: f64,
    std_error: f64,
    expected_attempts: f64,
    z_score: f64,
    relative_error: f64,
}

impl From<&ValidationCell> for ValidationRow {
    fn from(c: &ValidationCell) -> Self {
        ValidationRow {
            hops: c.hops,
            parts: c.parts,
            percent: c.percent,
            amount: c.amount,
            sessions: c.sessions,
            mean_attempts: c.mean_attempts,
            std_error: c.std_error,
            expected_attempts: c.expected_attempts,
            z_score: c.z_score(),
            relative_error: (c.mean_attempts - c.expected_attempts) / c.expected_attempts,
        }
    }
}

#[derive(Serialize)]
struct ValidationSummary {
    command: &'static str,
    config_hash: String,
    seed: u64,
    cells: usize,
    max_abs_z_score: f64,
    max_relative_error: f64,
    mean_attempts: f64,
    expected_attempts: f64,
}

fn validate_forced(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let f = cfg.force_path.as_ref().expect("checked by caller");
    if cfg.mode != SimulationMode::Dynamic {
        return Err(CliError::config("force_path", "forced-path validation runs in dynamic mode"));
    }
    let percents = f.percents.values("force_path.percents")?;
    let cells = with_pool(cfg, || -> Result<Vec<ValidationCell>, CliError> {
        let mut cells = Vec::new();
        for &l in &f.hops {
            for &k in &cfg.parts {
                for &p in &percents {
                    cells.push(forced_path_validation(f.capacity, l, k, p, f.sessions, cfg.seed)?);
                }
            }
        }
        Ok(cells)
    })??;
    let rows: Vec<ValidationRow> = cells.iter().map(ValidationRow::from).collect();
    let n = rows.len() as f64;
    let summary = ValidationSummary {
        command: "simulate",
        config_hash: cfg.hash(),
        seed: cfg.seed,
        cells: rows.len(),
        max_abs_z_score: rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max),
        max_relative_error: rows.iter().map(|r| r.relative_error.abs()).fold(0.0, f64::max),
        mean_attempts: rows.iter().map(|r| r.mean_attempts).sum::<f64>() / n,
        expected_attempts: rows.iter().map(|r| r.expected_attempts).sum::<f64>() / n,
    };
    let mut out = open_output(cfg, "simulate")?;
    out.csv("validation.csv", &rows)?;
    out.json("summary.json", &summary)?;
    Ok(finish(out))
}
