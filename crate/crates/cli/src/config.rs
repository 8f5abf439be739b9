//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use chanprob_core::graph::PriorPolicy;
use chanprob_core::simulator::{SimulationMode, Strategy, DEFAULT_CANDIDATES, DEFAULT_MAX_ATTEMPTS};
use chanprob_core::snapshot::SnapshotParams;
use chanprob_core::{PriorSpec, ServiceLevelObjective};

use crate::error::CliError;

/// Satoshi per mBTC.
pub const SAT_PER_MBTC: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required: runs never draw implicit entropy.
    pub seed: u64,
    /// Graph JSON; when absent the synthetic snapshot is generated.
    #[serde(default)]
    pub graph_path: Option<PathBuf>,
    #[serde(default)]
    pub snapshot: SnapshotParams,
    #[serde(default = "default_mode")]
    pub mode: SimulationMode,
    #[serde(default = "default_arms")]
    pub arms: Vec<ArmConfig>,
    #[serde(default)]
    pub prior: PriorPolicy,
    #[serde(default)]
    pub pairs: PairsSpec,
    #[serde(default)]
    pub amounts: AmountGrid,
    #[serde(default = "default_parts")]
    pub parts: Vec<u32>,
    #[serde(default = "default_slo")]
    pub slo: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    #[serde(default)]
    pub force_path: Option<ForcedPathConfig>,
    #[serde(default)]
    pub rebalance: RebalanceConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub infogain: InfoGainConfig,
}

fn default_mode() -> SimulationMode {
    SimulationMode::Static
}
fn default_arms() -> Vec<ArmConfig> {
    vec![ArmConfig::Kind(StrategyKind::Baseline), ArmConfig::Kind(StrategyKind::MaxLikelihood)]
}
fn default_parts() -> Vec<u32> {
    vec![1]
}
fn default_slo() -> f64 {
    0.99
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_workers() -> usize {
    1
}
fn default_max_attempts() -> usize {
    DEFAULT_MAX_ATTEMPTS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Baseline,
    MaxLikelihood,
}

/// An arm is a strategy name or a table with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArmConfig {
    Kind(StrategyKind),
    Full(ArmTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmTable {
    #[serde(default)]
    pub name: Option<String>,
    pub strategy: StrategyKind,
    #[serde(default)]
    pub candidate_count: Option<usize>,
    /// Run on the rebalanced graph.
    #[serde(default)]
    pub rebalanced: bool,
    /// Prior the sender assumes; defaults to the config's `prior.default`.
    #[serde(default)]
    pub prior: Option<PriorSpec>,
}

impl ArmConfig {
    pub fn table(&self) -> ArmTable {
        match self {
            ArmConfig::Kind(k) => ArmTable { name: None, strategy: *k, candidate_count: None, rebalanced: false, prior: None },
            ArmConfig::Full(t) => t.clone(),
        }
    }
}

impl ArmTable {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let base = match self.strategy {
                StrategyKind::Baseline => "baseline",
                StrategyKind::MaxLikelihood => "max_likelihood",
            };
            if self.rebalanced {
                format!("rebalanced_{base}")
            } else {
                base.to_string()
            }
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyKind::Baseline => Strategy::Baseline,
            StrategyKind::MaxLikelihood => {
                Strategy::MaximumLikelihood { candidate_count: self.candidate_count.unwrap_or(DEFAULT_CANDIDATES) }
            }
        }
    }
}

/// A count of random pairs or an explicit list of `[sender, receiver]` ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairsSpec {
    Count(usize),
    List(Vec<(String, String)>),
}

impl Default for PairsSpec {
    fn default() -> Self {
        PairsSpec::Count(100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountUnit {
    Satoshi,
    #[serde(rename = "mBTC", alias = "mbtc")]
    MilliBitcoin,
    CapacityFraction,
}

/// Inclusive grid `min, min + step, …, max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmountGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub unit: AmountUnit,
}

impl Default for AmountGrid {
    fn default() -> Self {
        AmountGrid { min: 1.0, max: 20.0, step: 1.0, unit: AmountUnit::MilliBitcoin }
    }
}

/// Values of an inclusive real grid, robust to accumulated rounding.
pub fn grid_values(field: &str, min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(CliError::config(field, format!("need finite min <= max and step > 0, got {min}..{max} by {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(CliError::config(field, "grid has too many points"));
    }
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

impl AmountGrid {
    /// Amounts in satoshi. `capacity` is required for capacity fractions.
    pub fn satoshi(&self, capacity: Option<u64>) -> Result<Vec<u64>, CliError> {
        let scale = match self.unit {
            AmountUnit::Satoshi => 1.0,
            AmountUnit::MilliBitcoin => SAT_PER_MBTC as f64,
            AmountUnit::CapacityFraction => capacity.ok_or_else(|| {
                CliError::config("amounts.unit", "capacity_fraction needs a graph whose channels share one capacity")
            })? as f64,
        };
        let mut out: Vec<u64> = grid_values("amounts", self.min, self.max, self.step)?
            .into_iter()
            .map(|v| (v * scale).round() as u64)
            .filter(|&a| a > 0)
            .collect();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::config("amounts", "grid contains no positive amount"));
        }
        Ok(out)
    }
}

/// Dynamic-mode validation on a forced line path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedPathConfig {
    #[serde(default = "default_hops")]
    pub hops: Vec<u32>,
    #[serde(default = "default_line_capacity")]
    pub capacity: u64,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
    #[serde(default = "default_validation_percents")]
    pub percents: PercentRange,
}

fn default_hops() -> Vec<u32> {
    vec![1, 2, 3]
}
fn default_line_capacity() -> u64 {
    600
}
fn default_sessions() -> usize {
    100_000
}
fn default_validation_percents() -> PercentRange {
    PercentRange { from: 1, to: 99, step: 10 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercentRange {
    pub from: u32,
    pub to: u32,
    pub step: u32,
}

impl PercentRange {
    pub fn values(&self, field: &str) -> Result<Vec<u32>, CliError> {
        if self.step == 0 || self.to < self.from {
            return Err(CliError::config(field, "need from <= to and step > 0"));
        }
        Ok((self.from..=self.to).step_by(self.step as usize).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebalanceConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub bins: usize,
}

impl Default for RebalanceConfig {
    fn default() -> Self {
        RebalanceConfig { tolerance: 1e-9, max_iterations: 100_000, bins: 20 }
    }
}

/// Grids for the closed-form tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Path success probabilities `s`.
    pub success_probs: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Objective grid of the attempts-versus-objective table.
    pub sigma_grid: Vec<f64>,
    /// Success probabilities of the attempts-versus-objective table.
    pub sigma_success_probs: Vec<f64>,
    pub parts: Vec<u32>,
    pub hops: Vec<u32>,
    /// Capacity for the uniform-model tables.
    pub capacity: u64,
    pub fraction_step: f64,
    pub mixed_p: Vec<f64>,
    /// Upper bound on attempts searched by the multi-part objective solver.
    pub attempt_cap: u64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            success_probs: (1..=99).map(|i| i as f64 / 100.0).collect(),
            sigmas: vec![0.9, 0.99, 0.999],
            sigma_grid: (50..=99).map(|i| i as f64 / 100.0).chain([0.995, 0.999, 0.9999]).collect(),
            sigma_success_probs: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            parts: vec![1, 2, 3, 4, 5],
            hops: vec![1, 2, 3, 4, 5],
            capacity: 1_000_000,
            fraction_step: 0.01,
            mixed_p: vec![0.0, 0.1, 0.3, 0.5, 0.7, 1.0],
            attempt_cap: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfoGainConfig {
    /// Capacity of every channel in the constant-capacity preset.
    pub capacity: u64,
    pub percents: PercentRange,
    pub parts: Vec<u32>,
    pub strategy: StrategyKind,
}

impl Default for InfoGainConfig {
    fn default() -> Self {
        InfoGainConfig {
            capacity: 1_000_000,
            percents: PercentRange { from: 1, to: 300, step: 1 },
            parts: vec![1, 2, 3],
            strategy: StrategyKind::MaxLikelihood,
        }
    }
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> Self {
        toml::from_str(&format!("seed = {seed}")).expect("defaults deserialize")
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::config("<toml>", e.message()))?;
        Self::from_value(serde_json::to_value(table)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config("<json>", e))?;
        Self::from_value(value)
    }

    fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner())
        })
    }

    /// Checks cross-field invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.parts.is_empty() || self.parts.contains(&0) {
            return Err(CliError::config("parts", "need at least one part count, each >= 1"));
        }
        ServiceLevelObjective::new(self.slo).map_err(|e| CliError::config("slo", e))?;
        if self.arms.is_empty() {
            return Err(CliError::config("arms", "need at least one arm"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, arm) in self.arms.iter().enumerate() {
            let t = arm.table();
            if t.candidate_count == Some(0) {
                return Err(CliError::config(format!("arms[{i}].candidate_count"), "must be >= 1"));
            }
            if !names.insert(t.name()) {
                return Err(CliError::config(format!("arms[{i}]"), format!("duplicate arm name {}", t.name())));
            }
        }
        if self.max_attempts == 0 {
            return Err(CliError::config("max_attempts", "must be >= 1"));
        }
        if let PairsSpec::Count(0) = self.pairs {
            return Err(CliError::config("pairs", "need at least one pair"));
        }
        if let PairsSpec::List(l) = &self.pairs {
            if l.is_empty() {
                return Err(CliError::config("pairs", "need at least one pair"));
            }
        }
        if self.rebalance.bins == 0 {
            return Err(CliError::config("rebalance.bins", "must be >= 1"));
        }
        if self.infogain.capacity == 0 {
            return Err(CliError::config("infogain.capacity", "must be >= 1"));
        }
        if self.infogain.parts.is_empty() || self.infogain.parts.contains(&0) {
            return Err(CliError::config("infogain.parts", "need at least one part count, each >= 1"));
        }
        self.infogain.percents.values("infogain.percents")?;
        if let Some(f) = &self.force_path {
            if f.hops.is_empty() || f.capacity == 0 || f.sessions < 2 {
                return Err(CliError::config("force_path", "need hops, capacity >= 1 and sessions >= 2"));
            }
            f.percents.values("force_path.percents")?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring settings that do not
    /// change results (worker count, output location).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        canonical.output_dir = PathBuf::new();
        let text = crate::output::to_sorted_json(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
