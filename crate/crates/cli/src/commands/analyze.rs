use std::path::PathBuf;

use serde::Serialize;

use chanprob_core::analytics::{
    attempts_for_slo_mpp, attempts_for_slo_single, break_even_amount, expected_attempts, expected_attempts_uniform_split,
    mixed_model_success, optimal_split_uniform, uniform_path_success,
};
use chanprob_core::{Amount, AttemptBound, Capacity, ServiceLevelObjective};

use super::{finish, open_output};
use crate::config::{grid_values, ExperimentConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct ExpectationRow {
    success_prob: f64,
    parts: u32,
    expected_attempts: f64,
}

#[derive(Serialize)]
struct SloRow {
    success_prob: f64,
    sigma: f64,
    attempts: u64,
}

#[derive(Serialize)]
struct MppSloRow {
    success_prob: f64,
    parts: u32,
    sigma: f64,
    /// Empty when the objective needs more than the configured cap.
    attempts: Option<u64>,
}

#[derive(Serialize)]
struct PathSuccessRow {
    amount_fraction: f64,
    hops: u32,
    success_prob: f64,
}

#[derive(Serialize)]
struct UniformExpectationRow {
    amount_fraction: f64,
    hops: u32,
    parts: u32,
    expected_attempts: f64,
}

#[derive(Serialize)]
struct OptimalSplitRow {
    amount_fraction: f64,
    hops: u32,
    optimal_parts: u32,
    expected_attempts: f64,
}

#[derive(Serialize)]
struct BreakEvenRow {
    hops: u32,
    parts_from: u32,
    parts_to: u32,
    break_even_fraction: f64,
}

#[derive(Serialize)]
struct MixedRow {
    amount_fraction: f64,
    hops: u32,
    p_bimodal: f64,
    success_prob: f64,
}

fn slo(field: &str, sigma: f64) -> Result<ServiceLevelObjective, CliError> {
    ServiceLevelObjective::new(sigma).map_err(|e| CliError::config(field, e))
}

fn check_probs(field: &str, ps: &[f64]) -> Result<(), CliError> {
    match ps.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        Some(p) => Err(CliError::config(field, format!("{p} is not in (0, 1]"))),
        None => Ok(()),
    }
}

/// Writes one CSV per closed-form table.
pub fn analyze(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.analyze;
    check_probs("analyze.success_probs", &a.success_probs)?;
    check_probs("analyze.sigma_success_probs", &a.sigma_success_probs)?;
    if a.parts.is_empty() || a.parts.contains(&0) {
        return Err(CliError::config("analyze.parts", "need part counts >= 1"));
    }
    if a.hops.is_empty() || a.hops.contains(&0) {
        return Err(CliError::config("analyze.hops", "need hop counts >= 1"));
    }
    if a.mixed_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::config("analyze.mixed_p", "probabilities must lie in [0, 1]"));
    }
    let cap = Capacity::new(a.capacity).map_err(|e| CliError::config("analyze.capacity", e))?;
    let sigmas = a.sigmas.iter().map(|&s| slo("analyze.sigmas", s)).collect::<Result<Vec<_>, _>>()?;
    let sigma_grid = a.sigma_grid.iter().map(|&s| slo("analyze.sigma_grid", s)).collect::<Result<Vec<_>, _>>()?;
    let fractions: Vec<f64> = grid_values("analyze.fraction_step", a.fraction_step, 1.0, a.fraction_step)?
        .into_iter()
        .map(|f| ((f * 1e9).round() / 1e9).min(1.0))
        .collect();
    let k_max = a.parts.iter().copied().max().unwrap_or(1);
    let c = a.capacity as f64;

    let mut out = open_output(cfg, "analyze")?;

    let mut rows = Vec::new();
    for &s in &a.success_probs {
        for &k in &a.parts {
            rows.push(ExpectationRow { success_prob: s, parts: k, expected_attempts: expected_attempts(s, k as u64)? });
        }
    }
    out.csv("expectation.csv", &rows)?;

    let mut rows = Vec::new();
    for &s in &a.success_probs {
        for &sigma in &sigmas {
            rows.push(SloRow { success_prob: s, sigma: sigma.sigma(), attempts: attempts_for_slo_single(s, sigma)? });
        }
    }
    out.csv("slo.csv", &rows)?;

    let mut rows = Vec::new();
    for &s in &a.sigma_success_probs {
        for &sigma in &sigma_grid {
            rows.push(SloRow { success_prob: s, sigma: sigma.sigma(), attempts: attempts_for_slo_single(s, sigma)? });
        }
    }
    out.csv("slo_sigma.csv", &rows)?;

    let mut rows = Vec::new();
    for &s in &a.success_probs {
        for &k in &a.parts {
            for &sigma in &sigmas {
                let attempts = match attempts_for_slo_mpp(s, k as u64, sigma, a.attempt_cap)? {
                    AttemptBound::Attempts(n) => Some(n),
                    AttemptBound::Unreachable => None,
                };
                rows.push(MppSloRow { success_prob: s, parts: k, sigma: sigma.sigma(), attempts });
            }
        }
    }
    out.csv("mpp_attempts.csv", &rows)?;

    let mut rows = Vec::new();
    for &l in &a.hops {
        for &f in &fractions {
            rows.push(PathSuccessRow { amount_fraction: f, hops: l, success_prob: uniform_path_success(f * c, cap, l)? });
        }
    }
    out.csv("uniform_path_success.csv", &rows)?;

    let mut rows = Vec::new();
    for &l in &a.hops {
        for &k in &a.parts {
            for &f in &fractions {
                rows.push(UniformExpectationRow {
                    amount_fraction: f,
                    hops: l,
                    parts: k,
                    expected_attempts: expected_attempts_uniform_split(f * c, cap, l, k)?,
                });
            }
        }
    }
    out.csv("expectation_uniform.csv", &rows)?;

    let mut rows = Vec::new();
    for &l in &a.hops {
        for &f in &fractions {
            let amount = Amount((f * c).round() as u64);
            if amount.0 == 0 {
                continue;
            }
            let plan = optimal_split_uniform(amount, cap, l, k_max)?;
            rows.push(OptimalSplitRow {
                amount_fraction: f,
                hops: l,
                optimal_parts: plan.parts(),
                expected_attempts: expected_attempts_uniform_split(amount.0 as f64, cap, l, plan.parts())?,
            });
        }
    }
    out.csv("expectation_mpp.csv", &rows)?;

    let mut rows = Vec::new();
    for &l in &a.hops {
        for k in 1..k_max {
            rows.push(BreakEvenRow {
                hops: l,
                parts_from: k,
                parts_to: k + 1,
                break_even_fraction: break_even_amount(cap, l, k, k + 1)? / c,
            });
        }
    }
    out.csv("break_even.csv", &rows)?;

    let mut rows = Vec::new();
    for &l in &a.hops {
        for &p in &a.mixed_p {
            for &f in &fractions {
                rows.push(MixedRow { amount_fraction: f, hops: l, p_bimodal: p, success_prob: mixed_model_success(f * c, cap, l, p)? });
            }
        }
    }
    out.csv("mixed_model_success.csv", &rows)?;

    Ok(finish(out))
}
