//! VEAT and SC-VEAT statistics, effect sizes and significance tests.
//!
//! For a target embedding `E` and attribute sets `A`, `B` the item score is
//! `s(E, A, B) = mean_a cos(E, a) - mean_b cos(E, b)`.
//!
//! * VEAT: `s(X, Y, A, B) = sum_x s(x) - sum_y s(y)`, with effect size
//!   `(mean_x s - mean_y s) / std_{X ∪ Y} s` and a one-sided test over equal
//!   re-partitions of `X ∪ Y`.
//! * SC-VEAT: `s(X, A, B) = sum_x s(x)`, with effect size `mean_x s / std_x s`.
//!   Significance shuffles `A ∪ B` into equal-size pseudo-attribute pairs,
//!   since reordering `X` cannot change a sum.
//!
//! Cosines between all targets and attributes are computed once per test;
//! permutations only re-add cached weights.

pub mod oracle;
mod permutation;
mod similarity;

use serde::{Deserialize, Serialize};

pub use permutation::{
    binomial, exact_p_value, monte_carlo_p_value, monte_carlo_partition, partition_statistic,
    permutation_p_value, Method, PValue, PermutationConfig, TieRule, TIE_RELATIVE_TOLERANCE,
};
pub use similarity::cosine;

use crate::embedding::{ConceptSet, VideoEmbedding};
use crate::error::{Error, Result};
use similarity::AssociationTable;

/// A standard deviation at or below this fraction of the largest |score| is zero.
pub const DEGENERATE_RELATIVE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StdDivisor {
    /// `n - 1`
    #[default]
    Sample,
    /// `n`
    Population,
}

impl StdDivisor {
    pub fn std_dev(self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let denom = match self {
            StdDivisor::Sample => n - 1.0,
            StdDivisor::Population => n,
        };
        (ss / denom).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub permutation: PermutationConfig,
    pub std_divisor: StdDivisor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationScore {
    pub video_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Veat,
    Scveat,
}

/// Outcome of one VEAT or SC-VEAT run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    /// Sum-form statistic.
    pub statistic: f64,
    /// Cohen's d; `None` when the pooled standard deviation is zero.
    pub effect_size: Option<f64>,
    pub p_value: f64,
    pub method: Method,
    pub iterations: u64,
    pub seed: u64,
    pub tie_rule: TieRule,
    pub std_divisor: StdDivisor,
    /// Partitions counted as extreme and partitions considered.
    pub exceed_count: u64,
    pub permutations: u64,
    /// X items first, then Y items for VEAT.
    pub item_scores: Vec<AssociationScore>,
    pub mean_x: f64,
    pub mean_y: Option<f64>,
    pub pooled_std: f64,
}

fn vectors(set: &ConceptSet) -> Vec<&[f64]> {
    set.members().iter().map(|m| m.vector.as_slice()).collect()
}

fn check_dims(sets: &[&ConceptSet]) -> Result<usize> {
    let dim = sets[0].dim();
    for s in sets {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }
    Ok(dim)
}

fn check_equal_sizes(x: &ConceptSet, y: &ConceptSet) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::UnequalSizes {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn nonzero_std(values: &[f64], divisor: StdDivisor) -> Result<f64> {
    let std = divisor.std_dev(values);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(std > DEGENERATE_RELATIVE_STD * scale) || !std.is_finite() {
        return Err(Error::Degenerate(
            "standard deviation of item scores is zero; effect size is undefined".into(),
        ));
    }
    Ok(std)
}

/// `s(E, A, B)`.
pub fn item_score(e: &VideoEmbedding, a: &ConceptSet, b: &ConceptSet) -> Result<AssociationScore> {
    if e.is_zero() {
        return Err(Error::ZeroVector(Some(e.video_id.clone())));
    }
    let table = AssociationTable::new(&[e.vector.as_slice()], &vectors(a), &vectors(b))?;
    Ok(AssociationScore {
        video_id: e.video_id.clone(),
        score: table.item_scores()[0],
    })
}

struct VeatScores {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VeatScores {
    fn compute(x: &ConceptSet, y: &ConceptSet, a: &ConceptSet, b: &ConceptSet) -> Result<Self> {
        check_equal_sizes(x, y)?;
        check_dims(&[x, y, a, b])?;
        let targets: Vec<&[f64]> = vectors(x).into_iter().chain(vectors(y)).collect();
        let mut scores = AssociationTable::new(&targets, &vectors(a), &vectors(b))?.item_scores();
        let ys = scores.split_off(x.len());
        Ok(Self { x: scores, y: ys })
    }

    fn statistic(&self) -> f64 {
        self.x.iter().sum::<f64>() - self.y.iter().sum::<f64>()
    }

    fn all(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    fn effect_size(&self, divisor: StdDivisor) -> Result<f64> {
        two_group_effect_size(&self.x, &self.y, divisor)
    }
}

/// `(mean(x) - mean(y)) / std(x ∪ y)` over precomputed item scores.
pub fn two_group_effect_size(x: &[f64], y: &[f64], divisor: StdDivisor) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet("item scores".into()));
    }
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let std = nonzero_std(&all, divisor)?;
    Ok((mean(x) - mean(y)) / std)
}

/// `mean(scores) / std(scores)` over precomputed item scores.
pub fn single_group_effect_size(scores: &[f64], divisor: StdDivisor) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::invalid("effect size needs at least 2 item scores"));
    }
    let std = nonzero_std(scores, divisor)?;
    Ok(mean(scores) / std)
}

/// `s(X, Y, A, B)`. Requires `|X| = |Y|`.
pub fn veat_statistic(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
) -> Result<f64> {
    Ok(VeatScores::compute(x, y, a, b)?.statistic())
}

/// Cohen's d for VEAT; errors with [`Error::Degenerate`] when all item scores agree.
pub fn veat_effect_size(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    divisor: StdDivisor,
) -> Result<f64> {
    VeatScores::compute(x, y, a, b)?.effect_size(divisor)
}

/// One-sided p-value over equal re-partitions of `X ∪ Y`.
pub fn veat_p_value(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    cfg: &PermutationConfig,
) -> Result<PValue> {
    let scores = VeatScores::compute(x, y, a, b)?;
    permutation_p_value(&scores.all(), x.len(), cfg)
}

/// Runs the full VEAT: statistic, effect size and p-value from one similarity table.
pub fn run_veat(
    x: &ConceptSet,
    y: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    cfg: &EngineConfig,
) -> Result<TestResult> {
    let scores = VeatScores::compute(x, y, a, b)?;
    let all = scores.all();
    let p = permutation_p_value(&all, x.len(), &cfg.permutation)?;
    let item_scores = x
        .members()
        .iter()
        .chain(y.members())
        .zip(&all)
        .map(|(m, &score)| AssociationScore {
            video_id: m.video_id.clone(),
            score,
        })
        .collect();
    Ok(TestResult {
        kind: TestKind::Veat,
        statistic: scores.statistic(),
        effect_size: scores.effect_size(cfg.std_divisor).ok(),
        p_value: p.p,
        method: p.method,
        iterations: p.iterations,
        seed: cfg.permutation.seed,
        tie_rule: cfg.permutation.tie_rule,
        std_divisor: cfg.std_divisor,
        exceed_count: p.count,
        permutations: p.total,
        item_scores,
        mean_x: mean(&scores.x),
        mean_y: Some(mean(&scores.y)),
        pooled_std: cfg.std_divisor.std_dev(&all),
    })
}

struct ScveatTable {
    scores: Vec<f64>,
    table: AssociationTable,
}

impl ScveatTable {
    fn compute(x: &ConceptSet, a: &ConceptSet, b: &ConceptSet) -> Result<Self> {
        check_dims(&[x, a, b])?;
        let table = AssociationTable::new(&vectors(x), &vectors(a), &vectors(b))?;
        Ok(Self {
            scores: table.item_scores(),
            table,
        })
    }

    fn effect_size(&self, divisor: StdDivisor) -> Result<f64> {
        single_group_effect_size(&self.scores, divisor)
    }

    fn p_value(&self, a: &ConceptSet, b: &ConceptSet, cfg: &PermutationConfig) -> Result<PValue> {
        check_equal_sizes(a, b)?;
        permutation_p_value(&self.table.attribute_totals(), a.len(), cfg)
    }
}

/// `s(X, A, B) = sum_x s(x, A, B)`.
pub fn scveat_statistic(x: &ConceptSet, a: &ConceptSet, b: &ConceptSet) -> Result<f64> {
    Ok(ScveatTable::compute(x, a, b)?.scores.iter().sum())
}

/// `mean_x s / std_x s`; errors with [`Error::Degenerate`] at zero spread.
pub fn scveat_effect_size(
    x: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    divisor: StdDivisor,
) -> Result<f64> {
    ScveatTable::compute(x, a, b)?.effect_size(divisor)
}

/// One-sided p-value under the attribute-shuffle null. Requires `|A| = |B|`.
pub fn scveat_p_value(
    x: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    cfg: &PermutationConfig,
) -> Result<PValue> {
    ScveatTable::compute(x, a, b)?.p_value(a, b, cfg)
}

pub fn run_scveat(
    x: &ConceptSet,
    a: &ConceptSet,
    b: &ConceptSet,
    cfg: &EngineConfig,
) -> Result<TestResult> {
    let t = ScveatTable::compute(x, a, b)?;
    let p = t.p_value(a, b, &cfg.permutation)?;
    let item_scores = x
        .members()
        .iter()
        .zip(&t.scores)
        .map(|(m, &score)| AssociationScore {
            video_id: m.video_id.clone(),
            score,
        })
        .collect();
    Ok(TestResult {
        kind: TestKind::Scveat,
        statistic: t.scores.iter().sum(),
        effect_size: t.effect_size(cfg.std_divisor).ok(),
        p_value: p.p,
        method: p.method,
        iterations: p.iterations,
        seed: cfg.permutation.seed,
        tie_rule: cfg.permutation.tie_rule,
        std_divisor: cfg.std_divisor,
        exceed_count: p.count,
        permutations: p.total,
        item_scores,
        mean_x: mean(&t.scores),
        mean_y: None,
        pooled_std: cfg.std_divisor.std_dev(&t.scores),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Role;

    fn set(name: &str, vs: &[[f64; 2]]) -> ConceptSet {
        ConceptSet::from_vectors(name, Role::Target, vs.iter().map(|v| v.to_vec()).collect())
            .unwrap()
    }

    fn pleasant() -> ConceptSet {
        set("a", &[[1.0, 0.0], [2.0, 0.0]])
    }

    fn unpleasant() -> ConceptSet {
        set("b", &[[0.0, 1.0], [0.0, 3.0]])
    }

    #[test]
    fn item_score_examples() {
        let e = VideoEmbedding::new("e", "t", vec![1.0, 0.0], 1).unwrap();
        let a = pleasant();
        assert_eq!(item_score(&e, &a, &a).unwrap().score, 0.0);
        assert_eq!(item_score(&e, &a, &unpleasant()).unwrap().score, 1.0);
        let wide = VideoEmbedding::new("w", "t", vec![1.0, 0.0, 0.0], 1).unwrap();
        assert!(matches!(
            item_score(&wide, &a, &unpleasant()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructed_scores_give_sqrt3() {
        // scores X:{1,1}, Y:{0,0}
        let x = set("x", &[[1.0, 0.0], [3.0, 0.0]]);
        let y = set("y", &[[1.0, 1.0], [2.0, 2.0]]);
        let (a, b) = (pleasant(), unpleasant());
        let r = run_veat(&x, &y, &a, &b, &EngineConfig::default()).unwrap();
        let scores: Vec<f64> = r.item_scores.iter().map(|s| s.score).collect();
        for (s, e) in scores.iter().zip([1.0, 1.0, 0.0, 0.0]) {
            assert!((s - e).abs() < 1e-15);
        }
        assert!((r.effect_size.unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        assert_eq!(r.method, Method::Exact);
        assert_eq!((r.exceed_count, r.permutations), (0, 6));
        assert_eq!(r.p_value, 0.0);
        assert!((r.pooled_std - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn veat_identical_targets() {
        let x = set("x", &[[1.0, 0.2], [0.3, 1.0], [0.5, 0.5]]);
        let (a, b) = (pleasant(), unpleasant());
        assert_eq!(veat_statistic(&x, &x, &a, &b).unwrap(), 0.0);
        assert_eq!(
            veat_effect_size(&x, &x, &a, &b, StdDivisor::Sample).unwrap(),
            0.0
        );
    }

    #[test]
    fn veat_unequal_sizes() {
        let x = set("x", &[[1.0, 0.2], [0.3, 1.0], [0.5, 0.5]]);
        let y = set("y", &[[1.0, 0.2], [0.3, 1.0]]);
        let (a, b) = (pleasant(), unpleasant());
        assert!(matches!(
            veat_statistic(&x, &y, &a, &b),
            Err(Error::UnequalSizes { left: 3, right: 2 })
        ));
        assert!(run_veat(&x, &y, &a, &b, &EngineConfig::default()).is_err());
    }

    #[test]
    fn veat_degenerate_effect() {
        let x = set("x", &[[1.0, 0.5], [2.0, 1.0]]);
        let (a, b) = (pleasant(), unpleasant());
        assert!(matches!(
            veat_effect_size(&x, &x, &a, &b, StdDivisor::Sample),
            Err(Error::Degenerate(_))
        ));
        let r = run_veat(&x, &x, &a, &b, &EngineConfig::default()).unwrap();
        assert_eq!(r.effect_size, None);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn scveat_examples() {
        let (a, b) = (pleasant(), unpleasant());
        let x = set("x", &[[0.3, 1.0], [1.0, 0.1]]);
        assert_eq!(scveat_statistic(&x, &a, &a).unwrap(), 0.0);
        let stat = scveat_statistic(&x, &a, &b).unwrap();
        let direct = item_score(&x.members()[0], &a, &b).unwrap().score
            + item_score(&x.members()[1], &a, &b).unwrap().score;
        assert_eq!(stat, direct);
    }

    #[test]
    fn score_level_effect_sizes() {
        let d = single_group_effect_size(&[0.3, 0.1, 0.2], StdDivisor::Sample).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        assert_eq!(
            single_group_effect_size(&[1.0, -1.0], StdDivisor::Sample).unwrap(),
            0.0
        );
        assert!(matches!(
            single_group_effect_size(&[0.1, 0.1, 0.1], StdDivisor::Sample),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            single_group_effect_size(&[0.0, 0.0], StdDivisor::Sample),
            Err(Error::Degenerate(_))
        ));
        let d = two_group_effect_size(&[1.0, 1.0], &[0.0, 0.0], StdDivisor::Sample).unwrap();
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
        assert!((d - 1.7321).abs() < 1e-4);
    }

    #[test]
    fn scveat_degenerate_and_symmetric() {
        let (a, b) = (pleasant(), unpleasant());
        let same = set("x", &[[1.0, 0.4], [2.0, 0.8], [0.5, 0.2]]);
        assert!(matches!(
            scveat_effect_size(&same, &a, &b, StdDivisor::Sample),
            Err(Error::Degenerate(_))
        ));
        // scores {1, -1}
        let sym = set("x", &[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(
            scveat_effect_size(&sym, &a, &b, StdDivisor::Sample).unwrap(),
            0.0
        );
    }

    #[test]
    fn scveat_unequal_attributes() {
        let a = set("a", &[[1.0, 0.0], [2.0, 0.1], [1.0, 0.3]]);
        let b = unpleasant();
        let x = set("x", &[[0.3, 1.0], [1.0, 0.1]]);
        assert!(scveat_statistic(&x, &a, &b).is_ok());
        assert!(matches!(
            scveat_p_value(&x, &a, &b, &PermutationConfig::default()),
            Err(Error::UnequalSizes { .. })
        ));
    }

    #[test]
    fn scveat_identical_attributes_null_true() {
        let a = pleasant();
        let a2 = set("a2", &[[1.0, 0.0], [2.0, 0.0]]);
        let x = set("x", &[[0.3, 1.0], [1.0, 0.1]]);
        let cfg = PermutationConfig {
            tie_rule: TieRule::PlusOne,
            ..Default::default()
        };
        let p = scveat_p_value(&x, &a, &a2, &cfg).unwrap();
        assert_eq!(p.p, 1.0);
    }

    #[test]
    fn std_divisors() {
        let v = [1.0, 1.0, 0.0, 0.0];
        assert!((StdDivisor::Sample.std_dev(&v) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((StdDivisor::Population.std_dev(&v) - 0.5).abs() < 1e-15);
    }
}
