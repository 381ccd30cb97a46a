//! Slow reference implementations used to cross-check the fast path.
//!
//! Everything here is recomputed from the raw vectors with nested loops: no
//! similarity table, no cached item scores, no subset-sum reduction. Keep it
//! that way; it is only useful while it shares no arithmetic with the engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::ConceptSet;
use crate::error::{Error, Result};

use super::{
    run_scveat, run_veat, EngineConfig, PermutationConfig, StdDivisor, TieRule,
    DEGENERATE_RELATIVE_STD, TIE_RELATIVE_TOLERANCE,
};

/// Largest pooled set the partition enumerators accept.
pub const MAX_ENUMERATION_ITEMS: usize = 24;

fn raw_cos(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector(None));
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

fn raw_item(e: &[f64], a: &[&[f64]], b: &[&[f64]]) -> Result<f64> {
    let mut sa = 0.0;
    for v in a {
        sa += raw_cos(e, v)?;
    }
    let mut sb = 0.0;
    for v in b {
        sb += raw_cos(e, v)?;
    }
    Ok(sa / a.len() as f64 - sb / b.len() as f64)
}

fn vecs(s: &ConceptSet) -> Vec<&[f64]> {
    s.members().iter().map(|m| m.vector.as_slice()).collect()
}

fn spread(values: &[f64], divisor: StdDivisor) -> Result<f64> {
    let n = values.len() as f64;
    let mut m = 0.0;
    for v in values {
        m += v;
    }
    m /= n;
    let mut ss = 0.0;
    let mut largest = 0.0f64;
    for v in values {
        ss += (v - m) * (v - m);
        largest = largest.max(v.abs());
    }
    let sd = match divisor {
        StdDivisor::Sample => (ss / (n - 1.0)).sqrt(),
        StdDivisor::Population => (ss / n).sqrt(),
    };
    if !(sd > DEGENERATE_RELATIVE_STD * largest) {
        return Err(Error::Degenerate("zero standard deviation".into()));
    }
    Ok(sd)
}

/// `(statistic, d)` for VEAT by direct recomputation.
pub fn oracle_veat(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    divisor: StdDivisor,
) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::UnequalSizes {
            left: x.len(),
            right: y.len(),
        });
    }
    let (av, bv) = (vecs(a), vecs(b));
    let mut xs = Vec::new();
    for e in vecs(x) {
        xs.push(raw_item(e, &av, &bv)?);
    }
    let mut ys = Vec::new();
    for e in vecs(y) {
        ys.push(raw_item(e, &av, &bv)?);
    }
    let mut statistic = 0.0;
    for s in &xs {
        statistic += s;
    }
    for s in &ys {
        statistic -= s;
    }
    let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut all = xs.clone();
    all.extend(&ys);
    let d = (mean_x - mean_y) / spread(&all, divisor)?;
    Ok((statistic, d))
}

/// `(statistic, d)` for SC-VEAT by direct recomputation.
pub fn oracle_scveat(
    x: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    divisor: StdDivisor,
) -> Result<(f64, f64)> {
    let (av, bv) = (vecs(a), vecs(b));
    let mut scores = Vec::new();
    for e in vecs(x) {
        scores.push(raw_item(e, &av, &bv)?);
    }
    let mut statistic = 0.0;
    for s in &scores {
        statistic += s;
    }
    let d = (statistic / scores.len() as f64) / spread(&scores, divisor)?;
    Ok((statistic, d))
}

/// Every bitmask over `n` items with exactly `n / 2` bits set.
fn half_masks(n: usize) -> Result<Vec<u32>> {
    if n > MAX_ENUMERATION_ITEMS {
        return Err(Error::invalid(format!(
            "oracle enumeration is limited to {MAX_ENUMERATION_ITEMS} items, got {n}"
        )));
    }
    Ok((0u32..1 << n)
        .filter(|m| m.count_ones() as usize * 2 == n)
        .collect())
}

fn tally(stats: &[f64], observed: f64, tol: f64, tie_rule: TieRule) -> u64 {
    stats
        .iter()
        .filter(|&&s| match tie_rule {
            TieRule::Strict => s > observed + tol,
            TieRule::PlusOne => s >= observed - tol,
        })
        .count() as u64
}

/// Exact VEAT permutation count `(k, total)`, recomputing each partition's
/// statistic as `sum over X_i - sum over Y_i` of freshly computed item scores.
pub fn oracle_veat_exact(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    tie_rule: TieRule,
) -> Result<(u64, u64)> {
    if x.len() != y.len() {
        return Err(Error::UnequalSizes {
            left: x.len(),
            right: y.len(),
        });
    }
    let (av, bv) = (vecs(a), vecs(b));
    let pool: Vec<&[f64]> = vecs(x).into_iter().chain(vecs(y)).collect();
    let n = pool.len();
    let masks = half_masks(n)?;
    let mut stats = Vec::with_capacity(masks.len());
    let mut observed = None;
    let observed_mask: u32 = (1 << x.len()) - 1;
    for &mask in &masks {
        let mut s = 0.0;
        for (i, e) in pool.iter().enumerate() {
            let score = raw_item(e, &av, &bv)?;
            if mask & (1 << i) != 0 {
                s += score;
            } else {
                s -= score;
            }
        }
        if mask == observed_mask {
            observed = Some(s);
        }
        stats.push(s);
    }
    let mut abs_total = 0.0;
    for e in &pool {
        abs_total += raw_item(e, &av, &bv)?.abs();
    }
    // the engine compares half-sums; statistics differ by twice as much
    let tol = 2.0 * TIE_RELATIVE_TOLERANCE * abs_total;
    let observed = observed.expect("observed partition is enumerated");
    Ok((tally(&stats, observed, tol, tie_rule), masks.len() as u64))
}

/// Exact SC-VEAT attribute-shuffle count `(k, total)`: each equal split of
/// `A ∪ B` is scored by recomputing `sum_x s(x, A_i, B_i)` from cosines.
pub fn oracle_scveat_exact(
    x: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    tie_rule: TieRule,
) -> Result<(u64, u64)> {
    if a.len() != b.len() {
        return Err(Error::UnequalSizes {
            left: a.len(),
            right: b.len(),
        });
    }
    let targets = vecs(x);
    let attrs: Vec<&[f64]> = vecs(a).into_iter().chain(vecs(b)).collect();
    let n = attrs.len();
    let masks = half_masks(n)?;
    let observed_mask: u32 = (1 << a.len()) - 1;
    let mut stats = Vec::with_capacity(masks.len());
    let mut observed = None;
    for &mask in &masks {
        let ai: Vec<&[f64]> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| attrs[i])
            .collect();
        let bi: Vec<&[f64]> = (0..n)
            .filter(|i| mask & (1 << i) == 0)
            .map(|i| attrs[i])
            .collect();
        let mut s = 0.0;
        for e in &targets {
            s += raw_item(e, &ai, &bi)?;
        }
        if mask == observed_mask {
            observed = Some(s);
        }
        stats.push(s);
    }
    let mut abs_total = 0.0;
    for v in &attrs {
        let mut col = 0.0;
        for e in &targets {
            col += raw_cos(e, v)?;
        }
        abs_total += col.abs();
    }
    let tol = 2.0 * TIE_RELATIVE_TOLERANCE * abs_total / a.len() as f64;
    let observed = observed.expect("observed partition is enumerated");
    Ok((tally(&stats, observed, tol, tie_rule), masks.len() as u64))
}

/// Outcome of [`cross_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub trials: usize,
    /// Largest relative disagreement seen on a statistic or effect size.
    pub max_relative_error: f64,
    pub mismatches: Vec<String>,
}

impl CrossCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn random_set(rng: &mut ChaCha8Rng, name: &str, n: usize, dim: usize) -> Result<ConceptSet> {
    let vectors = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    ConceptSet::from_vectors(name, crate::embedding::Role::Target, vectors)
}

/// Compares the engine with this module on `trials` random instances
/// (dimension 2..=8, set sizes 2..=6): statistics and effect sizes within
/// `tolerance` relative to `max(1, |oracle|)`, exact counts equal under both tie rules.
pub fn cross_check(trials: usize, seed: u64, tolerance: f64) -> Result<CrossCheck> {
    let mut report = CrossCheck {
        trials,
        max_relative_error: 0.0,
        mismatches: Vec::new(),
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let dim = rng.gen_range(2..=8);
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=6);
        let x = random_set(&mut rng, "x", n, dim)?;
        let y = random_set(&mut rng, "y", n, dim)?;
        let a = random_set(&mut rng, "a", m, dim)?;
        let b = random_set(&mut rng, "b", m, dim)?;
        let divisor = if rng.gen_bool(0.5) {
            StdDivisor::Sample
        } else {
            StdDivisor::Population
        };
        let mut close = |what: &str, fast: f64, slow: f64| {
            let err = (fast - slow).abs() / slow.abs().max(1.0);
            report.max_relative_error = report.max_relative_error.max(err);
            if !(err <= tolerance) {
                report
                    .mismatches
                    .push(format!("trial {trial}: {what} engine {fast} oracle {slow}"));
            }
        };
        let mut counts = Vec::new();
        for tie_rule in [TieRule::Strict, TieRule::PlusOne] {
            let cfg = EngineConfig {
                permutation: PermutationConfig {
                    exact_threshold: u64::MAX,
                    tie_rule,
                    ..Default::default()
                },
                std_divisor: divisor,
            };
            let v = run_veat(&x, &y, &a, &b, &cfg)?;
            let s = run_scveat(&x, &a, &b, &cfg)?;
            if tie_rule == TieRule::Strict {
                let (stat, d) = oracle_veat(&x, &y, &a, &b, divisor)?;
                close("VEAT statistic", v.statistic, stat);
                close("VEAT d", v.effect_size.unwrap_or(f64::NAN), d);
                let (stat, d) = oracle_scveat(&x, &a, &b, divisor)?;
                close("SC-VEAT statistic", s.statistic, stat);
                close("SC-VEAT d", s.effect_size.unwrap_or(f64::NAN), d);
            }
            counts.push((
                "VEAT",
                tie_rule,
                (v.exceed_count, v.permutations),
                oracle_veat_exact(&x, &y, &a, &b, tie_rule)?,
            ));
            counts.push((
                "SC-VEAT",
                tie_rule,
                (s.exceed_count, s.permutations),
                oracle_scveat_exact(&x, &a, &b, tie_rule)?,
            ));
        }
        for (what, rule, fast, slow) in counts {
            if fast != slow {
                report.mismatches.push(format!(
                    "trial {trial}: {what} exact count ({rule:?}) engine {fast:?} oracle {slow:?}"
                ));
            }
        }
    }
    Ok(report)
}
