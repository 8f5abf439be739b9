//! Closed-form reliability results: attempt distributions, service-level
//! objectives and equal-split multi-part payments under uniform priors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Amount, Capacity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
}

fn invalid(msg: impl Into<String>) -> AnalyticsError {
    AnalyticsError::InvalidArgs(msg.into())
}

fn check_unit(name: &str, p: f64) -> Result<(), AnalyticsError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p} is not a probability")))
    }
}

/// Target probability `sigma` that a payment completes within the computed
/// number of attempts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ServiceLevelObjective(f64);

impl ServiceLevelObjective {
    pub fn new(sigma: f64) -> Result<Self, AnalyticsError> {
        if (0.0..1.0).contains(&sigma) {
            Ok(Self(sigma))
        } else {
            Err(invalid(format!("service level objective {sigma} must lie in [0, 1)")))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ServiceLevelObjective {
    type Error = AnalyticsError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ServiceLevelObjective> for f64 {
    fn from(s: ServiceLevelObjective) -> f64 {
        s.0
    }
}

/// Equal split of `total` into `parts` integer amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    parts: u32,
    total: Amount,
}

impl SplitPlan {
    pub fn new(total: Amount, parts: u32) -> Result<Self, AnalyticsError> {
        if parts == 0 {
            return Err(invalid("a split needs at least one part"));
        }
        if total.0 < parts as u64 {
            return Err(invalid(format!("amount {total} cannot be split into {parts} non-empty parts")));
        }
        Ok(Self { parts, total })
    }

    pub fn parts(&self) -> u32 {
        self.parts
    }

    pub fn total(&self) -> Amount {
        self.total
    }

    /// The first `total mod parts` parts carry one extra satoshi.
    pub fn part_amounts(&self) -> Vec<Amount> {
        let k = self.parts as u64;
        let (q, r) = (self.total.0 / k, self.total.0 % k);
        (0..k).map(|i| Amount(if i < r { q + 1 } else { q })).collect()
    }

    /// Largest part.
    pub fn part_amount(&self) -> Amount {
        Amount(self.total.0.div_ceil(self.parts as u64))
    }
}

/// Result of an attempt search that may give up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptBound {
    Attempts(u64),
    Unreachable,
}

fn binomial_coefficient(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that the `k`-th success of independent trials with success
/// probability `s` happens exactly at trial `n`.
pub fn negative_bernoulli_pmf(s: f64, k: u64, n: u64) -> Result<f64, AnalyticsError> {
    check_unit("s", s)?;
    if k < 1 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k={k} n={n}")));
    }
    let successes = s.powi((k - 1) as i32) * (1.0 - s).powi((n - k) as i32);
    Ok(s * binomial_coefficient(n - 1, k - 1) * successes)
}

/// Expected number of attempts `k / s` to deliver `k` parts.
pub fn expected_attempts(s: f64, k: u64) -> Result<f64, AnalyticsError> {
    check_unit("s", s)?;
    if s == 0.0 {
        return Err(invalid("success probability 0 never delivers"));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    Ok(k as f64 / s)
}

/// Smallest `n` with `1 - (1 - s)^n > sigma`.
pub fn attempts_for_slo_single(s: f64, slo: ServiceLevelObjective) -> Result<u64, AnalyticsError> {
    check_unit("s", s)?;
    if s == 0.0 {
        return Err(invalid("success probability 0 cannot meet any objective"));
    }
    if s == 1.0 {
        return Ok(1);
    }
    let sigma = slo.sigma();
    let bound = (1.0 - sigma).ln() / (1.0 - s).ln();
    let mut n = (bound.floor() as u64 + 1).max(1);
    // The closed form can land one off when the bound is an integer in exact
    // arithmetic; settle it with the inequality itself.
    let meets = |n: u64| 1.0 - (1.0 - s).powi(n as i32) > sigma;
    while n > 1 && meets(n - 1) {
        n -= 1;
    }
    while !meets(n) {
        n += 1;
    }
    Ok(n)
}

/// Smallest `n >= k` such that at least `k` of `n` independent attempts
/// succeed with probability above `sigma`, scanning up to `n_cap`.
pub fn attempts_for_slo_mpp(s: f64, k: u64, slo: ServiceLevelObjective, n_cap: u64) -> Result<AttemptBound, AnalyticsError> {
    check_unit("s", s)?;
    if s == 0.0 {
        return Err(invalid("success probability 0 cannot meet any objective"));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if n_cap < k {
        return Err(invalid(format!("n_cap {n_cap} is below the {k} parts")));
    }
    let sigma = slo.sigma();
    let q = 1.0 - s;
    // At n = k: P(Bin(k, s) = i) for i < k, and the lower tail P(Bin <= k - 1).
    let j = k - 1;
    let mut pmf: Vec<f64> = (0..=j)
        .map(|i| binomial_coefficient(k, i) * s.powi(i as i32) * q.powi((k - i) as i32))
        .collect();
    // A single part reduces to `(1 - s)^n`, evaluated exactly as the
    // single-part solver does.
    let mut lower_tail: f64 = if k == 1 { q } else { pmf.iter().sum() };
    let mut n = k;
    loop {
        if 1.0 - lower_tail > sigma {
            return Ok(AttemptBound::Attempts(n));
        }
        if n >= n_cap {
            return Ok(AttemptBound::Unreachable);
        }
        // One more trial: P(Bin(n+1) <= j) = P(Bin(n) <= j) - s P(Bin(n) = j).
        lower_tail -= s * pmf[j as usize];
        for i in (0..=j as usize).rev() {
            let stay = q * pmf[i];
            let up = if i > 0 { s * pmf[i - 1] } else { 0.0 };
            pmf[i] = stay + up;
        }
        n += 1;
        lower_tail = if k == 1 { q.powi(n as i32) } else { lower_tail.max(0.0) };
    }
}

/// Path success `((c + 1 - a) / (c + 1))^l` for `l` uniform channels of
/// capacity `c`. The amount may be fractional.
pub fn uniform_path_success(a: f64, c: Capacity, l: u32) -> Result<f64, AnalyticsError> {
    let c1 = c.get() as f64 + 1.0;
    if !(0.0..=c1).contains(&a) {
        return Err(invalid(format!("amount {a} outside [0, c + 1]")));
    }
    Ok(((c1 - a) / c1).powi(l as i32))
}

/// Amount at which splitting into `k1` and `k2` equal parts needs the same
/// expected number of attempts on `l` uniform channels of capacity `c`.
///
/// Uses the continuous channel success `1 - a / c`.
pub fn break_even_amount(c: Capacity, l: u32, k1: u32, k2: u32) -> Result<f64, AnalyticsError> {
    if l == 0 || k1 == 0 || k2 == 0 {
        return Err(invalid("l, k1 and k2 must be positive"));
    }
    if k1 == k2 {
        return Err(invalid("equal part counts have identical curves"));
    }
    let (k1, k2) = (k1 as f64, k2 as f64);
    let root = (k2 / k1).powf(1.0 / l as f64);
    Ok(c.get() as f64 * (1.0 - root) / (1.0 / k2 - root / k1))
}

/// Expected attempts `k / s(a / k)` for an equal `k`-way split.
pub fn expected_attempts_uniform_split(a: f64, c: Capacity, l: u32, k: u32) -> Result<f64, AnalyticsError> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let s = uniform_path_success(a / k as f64, c, l)?;
    expected_attempts(s, k as u64)
}

/// The part count in `1..=k_max` minimizing expected attempts. Ties go to
/// fewer parts.
pub fn optimal_split_uniform(a: Amount, c: Capacity, l: u32, k_max: u32) -> Result<SplitPlan, AnalyticsError> {
    if a.0 == 0 || l == 0 || k_max == 0 {
        return Err(invalid("need a >= 1, l >= 1 and k_max >= 1"));
    }
    let amount = a.0 as f64;
    if amount / k_max as f64 > c.get() as f64 {
        return Err(invalid(format!("{k_max} parts of {a} still exceed capacity {c}")));
    }
    let mut best: Option<(u32, f64)> = None;
    for k in 1..=k_max.min(a.0.min(u32::MAX as u64) as u32) {
        if amount / k as f64 > c.get() as f64 {
            continue;
        }
        let e = expected_attempts_uniform_split(amount, c, l, k)?;
        if best.is_none_or(|(_, b)| e < b) {
            best = Some((k, e));
        }
    }
    let (k, _) = best.ok_or_else(|| invalid("no feasible part count"))?;
    SplitPlan::new(a, k)
}

/// Path success when a share `p` of the `l` channels is bimodal and the rest
/// uniform: `(1/2)^(p l) ((c - a + 1) / (c + 1))^((1 - p) l)`.
pub fn mixed_model_success(a: f64, c: Capacity, l: u32, p: f64) -> Result<f64, AnalyticsError> {
    check_unit("p", p)?;
    let cf = c.get() as f64;
    if !(0.0..=cf).contains(&a) {
        return Err(invalid(format!("amount {a} outside [0, c]")));
    }
    let l = l as f64;
    Ok(0.5f64.powf(p * l) * ((cf - a + 1.0) / (cf + 1.0)).powf((1.0 - p) * l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slo(s: f64) -> ServiceLevelObjective {
        ServiceLevelObjective::new(s).unwrap()
    }

    fn cap(c: u64) -> Capacity {
        Capacity::new(c).unwrap()
    }

    #[test]
    fn pmf_examples() {
        assert!((negative_bernoulli_pmf(0.5, 1, 3).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(negative_bernoulli_pmf(1.0, 1, 1).unwrap(), 1.0);
        assert!(negative_bernoulli_pmf(0.3, 2, 1).is_err());
        assert!(negative_bernoulli_pmf(0.3, 0, 1).is_err());
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expected_attempts(0.5, 1).unwrap(), 2.0);
        assert_eq!(expected_attempts(0.1, 1).unwrap(), 10.0);
        assert_eq!(expected_attempts(1.0, 3).unwrap(), 3.0);
        assert_eq!(expected_attempts(0.25, 2).unwrap(), 8.0);
        assert!(expected_attempts(0.0, 1).is_err());
    }

    #[test]
    fn slo_single_examples() {
        assert_eq!(attempts_for_slo_single(0.5, slo(0.99)).unwrap(), 7);
        assert_eq!(attempts_for_slo_single(0.1, slo(0.99)).unwrap(), 44);
        assert_eq!(attempts_for_slo_single(0.3, slo(0.0)).unwrap(), 1);
        assert_eq!(attempts_for_slo_single(1.0, slo(0.999)).unwrap(), 1);
        assert!(attempts_for_slo_single(0.0, slo(0.5)).is_err());
        // Exact boundary: 1 - 0.5^2 = 0.75 is not above 0.75.
        assert_eq!(attempts_for_slo_single(0.5, slo(0.75)).unwrap(), 3);
        assert!(ServiceLevelObjective::new(1.0).is_err());
    }

    #[test]
    fn slo_mpp_reduces_to_single_part() {
        for si in 1..=9 {
            let s = si as f64 / 10.0;
            for sigma in [0.5, 0.9, 0.99] {
                let single = attempts_for_slo_single(s, slo(sigma)).unwrap();
                assert_eq!(attempts_for_slo_mpp(s, 1, slo(sigma), 10_000).unwrap(), AttemptBound::Attempts(single), "s={s} sigma={sigma}");
            }
        }
    }

    #[test]
    fn slo_mpp_gives_up_at_cap() {
        assert_eq!(attempts_for_slo_mpp(0.05, 3, slo(0.999), 10).unwrap(), AttemptBound::Unreachable);
        assert!(attempts_for_slo_mpp(0.5, 3, slo(0.9), 2).is_err());
    }

    #[test]
    fn uniform_path_examples() {
        let s = uniform_path_success(10.0, cap(100), 4).unwrap();
        assert!((s - 0.6590).abs() < 5e-4);
        assert_eq!(uniform_path_success(10.0, cap(100), 0).unwrap(), 1.0);
        assert_eq!(uniform_path_success(0.0, cap(100), 3).unwrap(), 1.0);
        assert!(uniform_path_success(103.0, cap(100), 3).is_err());
    }

    #[test]
    fn break_even_examples() {
        let c = cap(7_000);
        assert!((break_even_amount(c, 2, 1, 4).unwrap() - 4_000.0).abs() < 1e-9);
        assert!((break_even_amount(cap(300), 1, 1, 2).unwrap() - 200.0).abs() < 1e-9);
        assert!(break_even_amount(c, 2, 2, 2).is_err());
        // Symmetric in the pair.
        assert!((break_even_amount(c, 3, 2, 3).unwrap() - break_even_amount(c, 3, 3, 2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn optimal_split_examples() {
        let c = cap(1_000);
        assert_eq!(optimal_split_uniform(Amount(1), c, 3, 8).unwrap().parts(), 1);
        for l in 1..=3 {
            let plan = optimal_split_uniform(Amount(200), c, l, 8).unwrap();
            assert_eq!(plan.parts(), 1);
            assert!(expected_attempts_uniform_split(200.0, c, l, 1).unwrap() <= 2.0);
        }
        assert!(optimal_split_uniform(Amount(5_000), c, 2, 4).is_err());
        // Above capacity a split is forced.
        assert!(optimal_split_uniform(Amount(1_500), c, 2, 4).unwrap().parts() >= 2);
    }

    #[test]
    fn split_plan_rounding() {
        let plan = SplitPlan::new(Amount(10), 3).unwrap();
        assert_eq!(plan.part_amounts(), vec![Amount(4), Amount(3), Amount(3)]);
        assert_eq!(plan.part_amount(), Amount(4));
        assert!(SplitPlan::new(Amount(2), 3).is_err());
        assert!(SplitPlan::new(Amount(2), 0).is_err());
    }

    #[test]
    fn mixed_model_examples() {
        let c = cap(100);
        assert!((mixed_model_success(10.0, c, 2, 0.5).unwrap() - 0.5 * 91.0 / 101.0).abs() < 1e-12);
        assert!((mixed_model_success(37.0, c, 3, 1.0).unwrap() - 0.125).abs() < 1e-12);
        assert!(
            (mixed_model_success(37.0, c, 3, 0.0).unwrap() - uniform_path_success(37.0, c, 3).unwrap()).abs() < 1e-12
        );
    }
}
