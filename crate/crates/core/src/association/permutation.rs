//! One-sided permutation tests over fixed per-element weights.
//!
//! Both tests reduce to the same problem. Each element of a pooled set carries
//! a fixed weight `w_i` (an item score for VEAT, a column total of cosines for
//! the SC-VEAT attribute shuffle). Splitting the pool into a first half `S` and
//! its complement gives the statistic `2 * sum_S(w) - sum(w)` (up to a positive
//! factor), so a partition can be ranked by its half-sum alone. The observed
//! partition is the one whose first half is elements `0..half`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition sums within this fraction of `sum |w_i|` of each other are ties.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Count partitions whose statistic strictly exceeds the observed one.
    #[default]
    Strict,
    /// Count partitions at or above the observed statistic (observed included).
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationConfig {
    pub seed: u64,
    /// Monte Carlo draws.
    pub iterations: u64,
    /// Largest partition count that is enumerated exhaustively.
    pub exact_threshold: u64,
    pub tie_rule: TieRule,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            iterations: 100_000,
            exact_threshold: 200_000,
            tie_rule: TieRule::Strict,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.exact_threshold == 0 {
            return Err(Error::invalid("exact_threshold must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    pub method: Method,
    /// Monte Carlo draws; 0 for exact enumeration.
    pub iterations: u64,
    /// Partitions counted as at least as extreme under the active rule.
    pub count: u64,
    /// Number of partitions enumerated (exact) or drawn (Monte Carlo).
    pub total: u64,
}

/// `C(n, k)`, or `None` if it does not fit in a `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Permuted statistic `2 * sum_S(w) - sum(w)` for the half `subset`.
pub fn partition_statistic(weights: &[f64], subset: &[usize]) -> f64 {
    2.0 * subset_sum(weights, subset) - weights.iter().sum::<f64>()
}

fn subset_sum(weights: &[f64], subset: &[usize]) -> f64 {
    subset.iter().map(|&i| weights[i]).sum()
}

fn tie_tolerance(weights: &[f64]) -> f64 {
    TIE_RELATIVE_TOLERANCE * weights.iter().map(|w| w.abs()).sum::<f64>()
}

fn check_split(weights: &[f64], half: usize) -> Result<()> {
    if half == 0 || weights.len() != 2 * half {
        return Err(Error::UnequalSizes {
            left: half,
            right: weights.len().saturating_sub(half),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("non-finite weight in permutation test"));
    }
    Ok(())
}

/// Exact or Monte Carlo p-value depending on `cfg.exact_threshold`.
pub fn permutation_p_value(
    weights: &[f64],
    half: usize,
    cfg: &PermutationConfig,
) -> Result<PValue> {
    cfg.validate()?;
    check_split(weights, half)?;
    let partitions = binomial(weights.len() as u64, half as u64);
    match partitions {
        Some(n) if n <= cfg.exact_threshold as u128 => exact_p_value(weights, half, cfg.tie_rule),
        _ => monte_carlo_p_value(weights, half, cfg.iterations, cfg.seed),
    }
}

/// Enumerates every equal-size partition.
///
/// `Strict` returns `#{stat > observed} / C(n, half)`; `PlusOne` returns
/// `#{stat >= observed} / C(n, half)`, where the observed partition itself is
/// among the enumerated ones and supplies the `+1`.
pub fn exact_p_value(weights: &[f64], half: usize, tie_rule: TieRule) -> Result<PValue> {
    check_split(weights, half)?;
    let n = weights.len();
    let total = binomial(n as u64, half as u64)
        .filter(|&t| t <= u64::MAX as u128)
        .ok_or_else(|| Error::invalid(format!("C({n}, {half}) is too large to enumerate")))?
        as u64;
    let observed: Vec<usize> = (0..half).collect();
    let observed_sum = subset_sum(weights, &observed);
    let tol = tie_tolerance(weights);

    let mut count = 0u64;
    let mut idx: Vec<usize> = (0..half).collect();
    loop {
        let s = subset_sum(weights, &idx);
        let extreme = match tie_rule {
            TieRule::Strict => s > observed_sum + tol,
            TieRule::PlusOne => s >= observed_sum - tol,
        };
        if extreme {
            count += 1;
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    Ok(PValue {
        p: count as f64 / total as f64,
        method: Method::Exact,
        iterations: 0,
        count,
        total,
    })
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Draws uniformly random equal-size partitions and returns
/// `(#{stat >= observed} + 1) / (iterations + 1)`.
///
/// Draw `i` uses a ChaCha8 stream keyed by `(seed, i)`, so the result does not
/// depend on how draws are scheduled across threads.
pub fn monte_carlo_p_value(
    weights: &[f64],
    half: usize,
    iterations: u64,
    seed: u64,
) -> Result<PValue> {
    check_split(weights, half)?;
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    let n = weights.len();
    let observed_sum: f64 = weights[..half].iter().sum();
    let threshold = observed_sum - tie_tolerance(weights);
    let count = (0..iterations)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(half),
            |buf, i| {
                let mut rng = draw_rng(seed, i);
                buf.clear();
                buf.extend(index::sample(&mut rng, n, half));
                buf.sort_unstable();
                u64::from(subset_sum(weights, buf) >= threshold)
            },
        )
        .sum::<u64>();
    Ok(PValue {
        p: (count + 1) as f64 / (iterations + 1) as f64,
        method: Method::MonteCarlo,
        iterations,
        count,
        total: iterations,
    })
}

fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

/// The half drawn by Monte Carlo draw `draw`, sorted. Exposed for verification.
pub fn monte_carlo_partition(n: usize, half: usize, seed: u64, draw: u64) -> Vec<usize> {
    let mut rng = draw_rng(seed, draw);
    let mut v = index::sample(&mut rng, n, half).into_vec();
    v.sort_unstable();
    v
}
