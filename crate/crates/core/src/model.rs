//! Balance priors for a single payment channel.
//!
//! A channel of capacity `c` splits its funds into the balance `b` held by
//! one endpoint and `c - b` held by the other. The balance is private, so the
//! sender models it as a random variable `X` over `{0, ..., c}`. Every query
//! the rest of the crate needs reduces to the probability mass of an integer
//! interval, which is what [`BalanceDistribution::mass_in`] computes.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A payment amount in satoshi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(v)
    }
}

/// A channel capacity in satoshi. Always at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Capacity(u64);

impl Capacity {
    pub fn new(value: u64) -> Result<Self, ModelError> {
        if value == 0 {
            return Err(ModelError::InvalidParameter("capacity must be at least 1".into()));
        }
        Ok(Capacity(value))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for Capacity {
    type Error = ModelError;

    fn try_from(value: u64) -> Result<Self, Self::Error> {
        Capacity::new(value)
    }
}

impl From<Capacity> for u64 {
    fn from(c: Capacity) -> u64 {
        c.0
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("conditioning on an event of probability zero")]
    ImpossibleEvent,
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
}

/// Prior (or posterior) over the balance `X` held by a channel's `node_a`.
///
/// `Restricted` is the generic posterior: `base` conditioned on
/// `lo <= X <= hi`. Conditioning a uniform prior takes the closed-form
/// `IntervalUniform` path instead.
#[derive(Debug, Clone, PartialEq)]
pub enum BalanceDistribution {
    Uniform { capacity: Capacity },
    /// Point masses at `b = 0` (probability `low_side_prob`) and `b = c`.
    Bimodal { capacity: Capacity, low_side_prob: f64 },
    /// Gaussian density evaluated at the integers of `[0, c]`, renormalized.
    NormalTruncated { capacity: Capacity, mean: f64, stddev: f64 },
    /// `p_bimodal` weight on a balanced `Bimodal`, the rest on `Uniform`.
    Mixed { capacity: Capacity, p_bimodal: f64 },
    Degenerate { capacity: Capacity, balance: u64 },
    IntervalUniform { capacity: Capacity, lo: u64, hi: u64 },
    Restricted { base: Arc<BalanceDistribution>, lo: u64, hi: u64 },
}

use BalanceDistribution as D;

fn check_prob(name: &str, p: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl BalanceDistribution {
    pub fn uniform(capacity: Capacity) -> Self {
        D::Uniform { capacity }
    }

    pub fn bimodal(capacity: Capacity, low_side_prob: f64) -> Result<Self, ModelError> {
        check_prob("low_side_prob", low_side_prob)?;
        Ok(D::Bimodal { capacity, low_side_prob })
    }

    pub fn normal(capacity: Capacity, mean: f64, stddev: f64) -> Result<Self, ModelError> {
        if !mean.is_finite() || !(stddev.is_finite() && stddev > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "normal prior needs finite mean and positive stddev, got mean={mean} stddev={stddev}"
            )));
        }
        if gaussian_lattice_sum(mean, stddev, 0, capacity.get()) <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "normal prior with mean={mean} stddev={stddev} puts no mass on [0, {capacity}]"
            )));
        }
        Ok(D::NormalTruncated { capacity, mean, stddev })
    }

    pub fn mixed(capacity: Capacity, p_bimodal: f64) -> Result<Self, ModelError> {
        check_prob("p_bimodal", p_bimodal)?;
        Ok(D::Mixed { capacity, p_bimodal })
    }

    pub fn known(capacity: Capacity, balance: u64) -> Result<Self, ModelError> {
        if balance > capacity.get() {
            return Err(ModelError::InvalidParameter(format!(
                "balance {balance} exceeds capacity {capacity}"
            )));
        }
        Ok(D::Degenerate { capacity, balance })
    }

    pub fn interval(capacity: Capacity, lo: u64, hi: u64) -> Result<Self, ModelError> {
        if lo > hi || hi > capacity.get() {
            return Err(ModelError::InvalidParameter(format!(
                "interval [{lo}, {hi}] is not inside [0, {capacity}]"
            )));
        }
        Ok(D::IntervalUniform { capacity, lo, hi })
    }

    pub fn capacity(&self) -> Capacity {
        match self {
            D::Uniform { capacity }
            | D::Bimodal { capacity, .. }
            | D::NormalTruncated { capacity, .. }
            | D::Mixed { capacity, .. }
            | D::Degenerate { capacity, .. }
            | D::IntervalUniform { capacity, .. } => *capacity,
            D::Restricted { base, .. } => base.capacity(),
        }
    }

    /// Checks the parameter invariants of values built without the constructors.
    pub fn validate(&self) -> Result<(), ModelError> {
        let c = self.capacity().get();
        match self {
            D::Uniform { .. } => Ok(()),
            D::Bimodal { low_side_prob, .. } => check_prob("low_side_prob", *low_side_prob),
            D::NormalTruncated { capacity, mean, stddev } => D::normal(*capacity, *mean, *stddev).map(|_| ()),
            D::Mixed { p_bimodal, .. } => check_prob("p_bimodal", *p_bimodal),
            D::Degenerate { capacity, balance } => D::known(*capacity, *balance).map(|_| ()),
            D::IntervalUniform { capacity, lo, hi } => D::interval(*capacity, *lo, *hi).map(|_| ()),
            D::Restricted { base, lo, hi } => {
                base.validate()?;
                if lo > hi || *hi > c {
                    return Err(ModelError::InvalidParameter(format!("restriction [{lo}, {hi}] out of range")));
                }
                if base.mass_in(*lo, *hi) <= 0.0 {
                    return Err(ModelError::InvalidParameter("restriction has zero mass".into()));
                }
                Ok(())
            }
        }
    }

    /// Splits the distribution into an unrestricted base and the interval it is
    /// confined to.
    fn decompose(&self) -> (&BalanceDistribution, u64, u64) {
        match self {
            D::Restricted { base, lo, hi } => (base.as_ref(), *lo, *hi),
            D::IntervalUniform { lo, hi, .. } => (self, *lo, *hi),
            _ => (self, 0, self.capacity().get()),
        }
    }

    /// Smallest interval containing all of the probability mass.
    pub fn support_bounds(&self) -> (u64, u64) {
        let c = self.capacity().get();
        match self {
            D::Degenerate { balance, .. } => (*balance, *balance),
            D::IntervalUniform { lo, hi, .. } => (*lo, *hi),
            D::Restricted { base, lo, hi } => {
                let (blo, bhi) = base.support_bounds();
                (blo.max(*lo), bhi.min(*hi))
            }
            D::Bimodal { low_side_prob, .. } if *low_side_prob == 1.0 => (0, 0),
            D::Bimodal { low_side_prob, .. } if *low_side_prob == 0.0 => (c, c),
            _ => (0, c),
        }
    }

    /// `P(X = b)`.
    pub fn pmf(&self, b: u64) -> f64 {
        self.mass_in(b, b)
    }

    /// `P(lo <= X <= hi)`. Empty or out-of-range intervals have mass zero.
    pub fn mass_in(&self, lo: u64, hi: u64) -> f64 {
        let c = self.capacity().get();
        let hi = hi.min(c);
        if lo > hi {
            return 0.0;
        }
        let contains = |x: u64| lo <= x && x <= hi;
        match self {
            D::Uniform { .. } => (hi - lo + 1) as f64 / (c + 1) as f64,
            D::IntervalUniform { lo: ilo, hi: ihi, .. } => {
                let l = lo.max(*ilo);
                let h = hi.min(*ihi);
                if l > h {
                    0.0
                } else {
                    (h - l + 1) as f64 / (ihi - ilo + 1) as f64
                }
            }
            D::Degenerate { balance, .. } => {
                if contains(*balance) {
                    1.0
                } else {
                    0.0
                }
            }
            D::Bimodal { low_side_prob, .. } => {
                let mut m = 0.0;
                if contains(0) {
                    m += low_side_prob;
                }
                if contains(c) {
                    m += 1.0 - low_side_prob;
                }
                m
            }
            D::Mixed { p_bimodal, .. } => {
                let mut bimodal = 0.0;
                if contains(0) {
                    bimodal += 0.5;
                }
                if contains(c) {
                    bimodal += 0.5;
                }
                let uniform = (hi - lo + 1) as f64 / (c + 1) as f64;
                p_bimodal * bimodal + (1.0 - p_bimodal) * uniform
            }
            D::NormalTruncated { mean, stddev, .. } => {
                let z = gaussian_lattice_sum(*mean, *stddev, 0, c);
                gaussian_lattice_sum(*mean, *stddev, lo, hi) / z
            }
            D::Restricted { base, lo: rlo, hi: rhi } => {
                let l = lo.max(*rlo);
                let h = hi.min(*rhi);
                if l > h {
                    return 0.0;
                }
                base.mass_in(l, h) / base.mass_in(*rlo, *rhi)
            }
        }
    }

    /// Dense probability table over `{0, ..., c}`.
    pub fn masses(&self) -> Vec<f64> {
        (0..=self.capacity().get()).map(|b| self.pmf(b)).collect()
    }

    /// Channel failure probability `P(X < a)`.
    pub fn failure_prob(&self, a: Amount) -> f64 {
        if a.0 == 0 {
            0.0
        } else {
            self.mass_in(0, a.0 - 1)
        }
    }

    /// Channel success probability `P(X >= a)`.
    pub fn success_prob(&self, a: Amount) -> f64 {
        self.mass_in(a.0, self.capacity().get())
    }

    /// Posterior after observing `X < a`.
    pub fn condition_on_failure(&self, a: Amount) -> Result<Self, ModelError> {
        if a.0 == 0 {
            return Err(ModelError::ImpossibleEvent);
        }
        self.restrict(0, a.0 - 1)
    }

    /// Posterior after observing `X >= a`.
    pub fn condition_on_success(&self, a: Amount) -> Result<Self, ModelError> {
        self.restrict(a.0, self.capacity().get())
    }

    /// Posterior after observing `lo <= X <= hi`.
    pub fn restrict(&self, lo: u64, hi: u64) -> Result<Self, ModelError> {
        let c = self.capacity().get();
        let (base, blo, bhi) = self.decompose();
        let lo = lo.max(blo);
        let hi = hi.min(bhi).min(c);
        if lo > hi || base.mass_in(lo, hi) <= 0.0 {
            return Err(ModelError::ImpossibleEvent);
        }
        if lo == blo && hi == bhi {
            return Ok(self.clone());
        }
        let capacity = base.capacity();
        Ok(match base {
            D::Uniform { .. } | D::IntervalUniform { .. } => D::IntervalUniform { capacity, lo, hi },
            D::Degenerate { .. } => base.clone(),
            _ if lo == 0 && hi == c => base.clone(),
            _ => D::Restricted { base: Arc::new(base.clone()), lo, hi },
        })
    }

    /// If `self` is `other` conditioned on an interval, returns the mass that
    /// interval had under `other`.
    pub(crate) fn restriction_mass_under(&self, other: &BalanceDistribution) -> Option<f64> {
        let (base, lo, hi) = self.decompose();
        let (obase, olo, ohi) = other.decompose();
        let same_base = match (base, obase) {
            (D::IntervalUniform { capacity: a, .. }, D::IntervalUniform { capacity: b, .. })
            | (D::IntervalUniform { capacity: a, .. }, D::Uniform { capacity: b })
            | (D::Uniform { capacity: a }, D::IntervalUniform { capacity: b, .. }) => a == b,
            _ => base == obase,
        };
        if !same_base || lo < olo || hi > ohi {
            return None;
        }
        let inner = uniform_or(base, lo, hi);
        let outer = uniform_or(obase, olo, ohi);
        Some(inner / outer)
    }

    /// Draws a balance. Deterministic for a given stream state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let c = self.capacity().get();
        match self {
            D::Uniform { .. } => rng.random_range(0..=c),
            D::IntervalUniform { lo, hi, .. } => rng.random_range(*lo..=*hi),
            D::Degenerate { balance, .. } => *balance,
            D::Bimodal { low_side_prob, .. } => {
                if rng.random::<f64>() < *low_side_prob {
                    0
                } else {
                    c
                }
            }
            D::Mixed { p_bimodal, .. } => {
                if rng.random::<f64>() < *p_bimodal {
                    if rng.random::<bool>() {
                        c
                    } else {
                        0
                    }
                } else {
                    rng.random_range(0..=c)
                }
            }
            D::NormalTruncated { .. } | D::Restricted { .. } => self.sample_inverse_cdf(rng.random::<f64>()),
        }
    }

    /// Smallest `x` with `P(X <= x) > u`, by bisection over the support.
    fn sample_inverse_cdf(&self, u: f64) -> u64 {
        let (mut lo, mut hi) = self.support_bounds();
        let start = lo;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.mass_in(start, mid) > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        let c = self.capacity().get();
        match self {
            D::Uniform { .. } => ((c + 1) as f64).ln(),
            D::IntervalUniform { lo, hi, .. } => ((hi - lo + 1) as f64).ln(),
            D::Degenerate { .. } => 0.0,
            D::Bimodal { low_side_prob, .. } => plogp(*low_side_prob) + plogp(1.0 - low_side_prob),
            D::Mixed { p_bimodal, .. } => {
                let interior = (1.0 - p_bimodal) / (c + 1) as f64;
                let edge = p_bimodal / 2.0 + interior;
                2.0 * plogp(edge) + (c - 1) as f64 * plogp(interior)
            }
            D::NormalTruncated { .. } | D::Restricted { .. } => {
                let (lo, hi) = self.support_bounds();
                (lo..=hi).map(|b| plogp(self.pmf(b))).sum()
            }
        }
    }
}

fn uniform_or(base: &BalanceDistribution, lo: u64, hi: u64) -> f64 {
    match base {
        D::IntervalUniform { capacity, .. } => D::Uniform { capacity: *capacity }.mass_in(lo, hi),
        _ => base.mass_in(lo, hi),
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Below this standard deviation the Gaussian is summed term by term.
const DIRECT_SUM_MAX_STDDEV: f64 = 64.0;
/// Terms further than this many standard deviations from the mean underflow.
const TAIL_CUTOFF_SIGMAS: f64 = 40.0;

/// `sum_{b=lo}^{hi} exp(-(b - mean)^2 / (2 stddev^2))`.
///
/// Wide Gaussians use Euler-Maclaurin with corrections through the third
/// derivative; the remainder is far below f64 resolution once the standard
/// deviation exceeds [`DIRECT_SUM_MAX_STDDEV`].
fn gaussian_lattice_sum(mean: f64, stddev: f64, lo: u64, hi: u64) -> f64 {
    if lo > hi {
        return 0.0;
    }
    let window_lo = (mean - TAIL_CUTOFF_SIGMAS * stddev).ceil().max(0.0);
    let window_hi = (mean + TAIL_CUTOFF_SIGMAS * stddev).floor();
    let l = (lo as f64).max(window_lo);
    let h = (hi as f64).min(window_hi);
    if l > h {
        return 0.0;
    }
    let density = |x: f64| {
        let z = (x - mean) / stddev;
        (-0.5 * z * z).exp()
    };
    if stddev < DIRECT_SUM_MAX_STDDEV {
        let (l, h) = (l as u64, h as u64);
        return (l..=h).map(|b| density(b as f64)).sum();
    }
    let var = stddev * stddev;
    let d1 = |x: f64| -(x - mean) / var * density(x);
    let d3 = |x: f64| {
        let u = x - mean;
        (3.0 * u / (var * var) - u * u * u / (var * var * var)) * density(x)
    };
    let integral = stddev * (std::f64::consts::PI / 2.0).sqrt() * erf_diff((l - mean) / (stddev * std::f64::consts::SQRT_2), (h - mean) / (stddev * std::f64::consts::SQRT_2));
    integral + (density(l) + density(h)) / 2.0 + (d1(h) - d1(l)) / 12.0 - (d3(h) - d3(l)) / 720.0
}

/// `erf(b) - erf(a)` for `a <= b`, avoiding cancellation in the tails.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else if b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    }
}

/// Prior specification as written in experiment configs.
///
/// ```json
/// {"type":"uniform"}
/// {"type":"bimodal","low_side_prob":0.5}
/// {"type":"normal","mean_frac":0.5,"stddev_frac":0.1}
/// {"type":"mixed","p_bimodal":0.3}
/// {"type":"known","balance":N}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    #[default]
    Uniform,
    Bimodal {
        #[serde(default = "half")]
        low_side_prob: f64,
    },
    Normal {
        #[serde(default = "half")]
        mean_frac: f64,
        #[serde(default = "tenth")]
        stddev_frac: f64,
    },
    Mixed { p_bimodal: f64 },
    Known { balance: u64 },
}

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}


impl PriorSpec {
    /// The prior assumed for rebalanced networks.
    pub fn rebalanced() -> Self {
        PriorSpec::Normal { mean_frac: 0.5, stddev_frac: 0.1 }
    }

    pub fn build(&self, capacity: Capacity) -> Result<BalanceDistribution, ModelError> {
        let c = capacity.get() as f64;
        match *self {
            PriorSpec::Uniform => Ok(D::uniform(capacity)),
            PriorSpec::Bimodal { low_side_prob } => D::bimodal(capacity, low_side_prob),
            PriorSpec::Normal { mean_frac, stddev_frac } => D::normal(capacity, mean_frac * c, stddev_frac * c),
            PriorSpec::Mixed { p_bimodal } => D::mixed(capacity, p_bimodal),
            PriorSpec::Known { balance } => D::known(capacity, balance),
        }
    }
}
