//! Post-hoc analysis of effect sizes: demographic correlation, debias-condition
//! comparison, effect-size classes, rater agreement and CLIP/human coherence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::association::TestResult;
use crate::error::{Error, Result};

/// Sign flips are only reported when both effects are at least this large.
pub const SIGN_FLIP_TOLERANCE: f64 = 1e-9;

/// Majority label for videos without a unique plurality.
pub const CANT_ANSWER: &str = "Can't answer";

/// Real-world composition of one occupation (percentages) or award (counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicRecord {
    pub label: String,
    /// Stereotyped group for occupations (Female, Male, Black, White);
    /// STEM / non-STEM for awards.
    pub attribute_group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_women: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_black: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pct_white: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_female: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_black: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total: Option<u32>,
}

/// Demographic statistic an effect size is correlated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemographicAxis {
    PctMale,
    PctWomen,
    PctWhite,
    PctBlack,
    PctNonBlack,
}

impl DemographicAxis {
    pub const ALL: [DemographicAxis; 5] = [
        DemographicAxis::PctMale,
        DemographicAxis::PctWomen,
        DemographicAxis::PctWhite,
        DemographicAxis::PctBlack,
        DemographicAxis::PctNonBlack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DemographicAxis::PctMale => "pct_male",
            DemographicAxis::PctWomen => "pct_women",
            DemographicAxis::PctWhite => "pct_white",
            DemographicAxis::PctBlack => "pct_black",
            DemographicAxis::PctNonBlack => "pct_non_black",
        }
    }
}

impl fmt::Display for DemographicAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl DemographicRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pct_women", self.pct_women),
            ("pct_black", self.pct_black),
            ("pct_white", self.pct_white),
        ] {
            if let Some(v) = v {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "{}: {name} = {v} is outside [0, 100]",
                        self.label
                    )));
                }
            }
        }
        if let Some(total) = self.n_total {
            for (name, v) in [("n_female", self.n_female), ("n_black", self.n_black)] {
                if v.is_some_and(|v| v > total) {
                    return Err(Error::invalid(format!(
                        "{}: {name} exceeds n_total = {total}",
                        self.label
                    )));
                }
            }
            if total == 0 {
                return Err(Error::invalid(format!("{}: n_total is zero", self.label)));
            }
        } else if self.n_female.is_some() || self.n_black.is_some() {
            return Err(Error::invalid(format!(
                "{}: counts given without n_total",
                self.label
            )));
        }
        Ok(())
    }

    /// Percentage for `axis`. Award percentages are derived from the counts.
    pub fn axis_value(&self, axis: DemographicAxis) -> Option<f64> {
        let share = |n: Option<u32>| -> Option<f64> {
            let total = self.n_total? as f64;
            Some(n? as f64 / total * 100.0)
        };
        let complement = |n: Option<u32>| -> Option<f64> {
            let total = self.n_total?;
            Some((total - n?) as f64 / total as f64 * 100.0)
        };
        match axis {
            DemographicAxis::PctWomen => self.pct_women.or_else(|| share(self.n_female)),
            DemographicAxis::PctMale => self
                .pct_women
                .map(|w| 100.0 - w)
                .or_else(|| complement(self.n_female)),
            DemographicAxis::PctBlack => self.pct_black.or_else(|| share(self.n_black)),
            DemographicAxis::PctNonBlack => self
                .pct_black
                .map(|b| 100.0 - b)
                .or_else(|| complement(self.n_black)),
            DemographicAxis::PctWhite => self.pct_white,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub label: String,
    pub effect_size: f64,
    pub statistic_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub pairs: Vec<CorrelationPair>,
}

/// Pearson product-moment correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::UnequalSizes {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::invalid(format!(
            "correlation needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlates effect sizes with demographic percentages over labelled pairs.
pub fn correlate(pairs: Vec<CorrelationPair>) -> Result<CorrelationResult> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.effect_size).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.statistic_pct).collect();
    let r = pearson_r(&xs, &ys)?;
    Ok(CorrelationResult {
        r,
        n: pairs.len(),
        pairs,
    })
}

/// Conventional Cohen's d magnitude bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectClass {
    Neutral,
    Small,
    Medium,
    Large,
}

impl EffectClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectClass::Neutral => "neutral",
            EffectClass::Small => "small",
            EffectClass::Medium => "medium",
            EffectClass::Large => "large",
        }
    }
}

impl fmt::Display for EffectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `|d| < 0.2` neutral, `< 0.5` small, `< 0.8` medium, otherwise large.
pub fn classify_effect(d: f64) -> Result<EffectClass> {
    if !d.is_finite() {
        return Err(Error::invalid(format!("effect size {d} is not finite")));
    }
    let m = d.abs();
    Ok(if m < 0.2 {
        EffectClass::Neutral
    } else if m < 0.5 {
        EffectClass::Small
    } else if m < 0.8 {
        EffectClass::Medium
    } else {
        EffectClass::Large
    })
}

/// Prompting condition a video set was generated under.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    #[default]
    Control,
    Debias1,
    Debias2,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Control, Condition::Debias1, Condition::Debias2];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Control => "control",
            Condition::Debias1 => "debias1",
            Condition::Debias2 => "debias2",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(Condition::Control),
            "debias1" => Ok(Condition::Debias1),
            "debias2" => Ok(Condition::Debias2),
            other => Err(Error::invalid(format!("unknown condition `{other}`"))),
        }
    }
}

/// Effect size of one scenario under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEffect {
    pub scenario: String,
    pub condition: Condition,
    pub d: f64,
}

/// One debias condition measured against control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasShift {
    pub d: f64,
    /// `d - d_control`
    pub delta: f64,
    pub sign_flip: bool,
    pub magnitude_increased: bool,
    pub class: EffectClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub scenario: String,
    pub d_control: f64,
    pub control_class: EffectClass,
    pub debias1: Option<DebiasShift>,
    pub debias2: Option<DebiasShift>,
}

impl ComparisonResult {
    pub fn shift(&self, condition: Condition) -> Option<&DebiasShift> {
        match condition {
            Condition::Control => None,
            Condition::Debias1 => self.debias1.as_ref(),
            Condition::Debias2 => self.debias2.as_ref(),
        }
    }

    pub fn d(&self, condition: Condition) -> Option<f64> {
        match condition {
            Condition::Control => Some(self.d_control),
            _ => self.shift(condition).map(|s| s.d),
        }
    }
}

fn shift(control: f64, d: f64) -> Result<DebiasShift> {
    let flip = control.abs() >= SIGN_FLIP_TOLERANCE
        && d.abs() >= SIGN_FLIP_TOLERANCE
        && control.signum() != d.signum();
    Ok(DebiasShift {
        d,
        delta: d - control,
        sign_flip: flip,
        magnitude_increased: d.abs() > control.abs(),
        class: classify_effect(d)?,
    })
}

/// Compares debias conditions with control per scenario, in first-seen order.
pub fn compare_conditions(effects: &[ConditionEffect]) -> Result<Vec<ComparisonResult>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_scenario: HashMap<&str, BTreeMap<Condition, f64>> = HashMap::new();
    for e in effects {
        if !e.d.is_finite() {
            return Err(Error::invalid(format!(
                "scenario `{}` ({}): effect size is not finite",
                e.scenario, e.condition
            )));
        }
        let entry = by_scenario.entry(e.scenario.as_str()).or_insert_with(|| {
            order.push(e.scenario.as_str());
            BTreeMap::new()
        });
        if entry.insert(e.condition, e.d).is_some() {
            return Err(Error::Duplicate {
                kind: "scenario condition",
                key: format!("{} / {}", e.scenario, e.condition),
            });
        }
    }
    order
        .into_iter()
        .map(|scenario| {
            let ds = &by_scenario[scenario];
            let control = *ds.get(&Condition::Control).ok_or_else(|| {
                Error::invalid(format!("scenario `{scenario}` has no control condition"))
            })?;
            let debias = |c: Condition| ds.get(&c).map(|&d| shift(control, d)).transpose();
            Ok(ComparisonResult {
                scenario: scenario.to_string(),
                d_control: control,
                control_class: classify_effect(control)?,
                debias1: debias(Condition::Debias1)?,
                debias2: debias(Condition::Debias2)?,
            })
        })
        .collect()
}

/// One annotator's label for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub annotator_id: String,
    pub category: String,
}

/// Reads `video_id,annotator_id,category` CSV (header required).
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(file, &path.display().to_string())
}

pub fn parse_annotations<R: Read>(reader: R, context: &str) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|source| Error::Csv {
        context: context.to_string(),
        source,
    })?;
    if headers.iter().collect::<Vec<_>>() != ["video_id", "annotator_id", "category"] {
        return Err(Error::invalid(format!(
            "{context}: expected header video_id,annotator_id,category"
        )));
    }
    rdr.deserialize()
        .map(|r| {
            r.map_err(|source| Error::Csv {
                context: context.to_string(),
                source,
            })
        })
        .collect()
}

fn counts_by_video(
    annotations: &[AnnotationRecord],
) -> Result<BTreeMap<&str, BTreeMap<&str, usize>>> {
    let mut seen = HashSet::new();
    let mut out: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for a in annotations {
        if !seen.insert((a.video_id.as_str(), a.annotator_id.as_str())) {
            return Err(Error::Duplicate {
                kind: "annotation",
                key: format!("{} / {}", a.video_id, a.annotator_id),
            });
        }
        *out.entry(&a.video_id)
            .or_default()
            .entry(&a.category)
            .or_default() += 1;
    }
    Ok(out)
}

/// Fleiss' kappa over the video × category count matrix.
pub fn fleiss_kappa(annotations: &[AnnotationRecord]) -> Result<f64> {
    let counts = counts_by_video(annotations)?;
    if counts.len() < 2 {
        return Err(Error::invalid(
            "Fleiss' kappa needs at least 2 rated videos",
        ));
    }
    let raters: Vec<usize> = counts.values().map(|c| c.values().sum()).collect();
    let n = raters[0];
    if raters.iter().any(|&r| r != n) {
        return Err(Error::invalid(
            "every video must be rated by the same number of annotators",
        ));
    }
    if n < 2 {
        return Err(Error::invalid(
            "Fleiss' kappa needs at least 2 annotators per video",
        ));
    }
    let items = counts.len() as f64;
    let mut category_totals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut agreement_sum = 0.0;
    for per_video in counts.values() {
        let sq: usize = per_video.values().map(|c| c * c).sum();
        agreement_sum += (sq - n) as f64 / (n * (n - 1)) as f64;
        for (cat, c) in per_video {
            *category_totals.entry(cat).or_default() += c;
        }
    }
    let p_bar = agreement_sum / items;
    let grand = items * n as f64;
    let p_e: f64 = category_totals
        .values()
        .map(|&c| {
            let p = c as f64 / grand;
            p * p
        })
        .sum();
    if category_totals.len() < 2 || 1.0 - p_e <= f64::EPSILON {
        return Err(Error::Degenerate(
            "all ratings fall in one category; kappa is undefined".into(),
        ));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Majority label per video; videos without a unique plurality get [`CANT_ANSWER`].
pub fn majority_vote(annotations: &[AnnotationRecord]) -> Result<BTreeMap<String, String>> {
    let counts = counts_by_video(annotations)?;
    Ok(counts
        .into_iter()
        .map(|(video, cats)| {
            let top = cats.values().copied().max().unwrap_or(0);
            let mut leaders = cats.iter().filter(|(_, &c)| c == top);
            let label = match (leaders.next(), leaders.next()) {
                (Some((cat, _)), None) => cat.to_string(),
                _ => CANT_ANSWER.to_string(),
            };
            (video.to_string(), label)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coherence {
    Coherent,
    Incoherent,
    /// Effect inside the neutrality band or tied human counts.
    NotApplicable,
}

/// Whether human majority labels point the same way as the effect size `d`:
/// positive `d` should mean more videos voted `group_a` than `group_b`.
pub fn coherence_for_effect(
    d: f64,
    annotations: &[AnnotationRecord],
    group_a: &str,
    group_b: &str,
) -> Result<Coherence> {
    if classify_effect(d)? == EffectClass::Neutral {
        return Ok(Coherence::NotApplicable);
    }
    let votes = majority_vote(annotations)?;
    let count = |g: &str| votes.values().filter(|v| v.as_str() == g).count();
    let (ca, cb) = (count(group_a), count(group_b));
    Ok(if ca == cb {
        Coherence::NotApplicable
    } else if (d > 0.0) == (ca > cb) {
        Coherence::Coherent
    } else {
        Coherence::Incoherent
    })
}

pub fn directionality_coherence(
    result: &TestResult,
    annotations: &[AnnotationRecord],
    group_a: &str,
    group_b: &str,
) -> Result<Coherence> {
    let d = result
        .effect_size
        .ok_or_else(|| Error::Degenerate("test result has no finite effect size".into()))?;
    coherence_for_effect(d, annotations, group_a, group_b)
}
