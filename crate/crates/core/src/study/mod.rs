//! Batteries of named VEAT and SC-VEAT tests run over embedding archives,
//! joined against the bundled reference tables.

mod catalog;
mod manifest;
pub mod reference;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::association::{
    run_scveat, run_veat, EngineConfig, PermutationConfig, StdDivisor, TestResult,
};
use crate::embedding::{group_by_concept, read_archive, ConceptSet, Role, VideoEmbedding};
use crate::error::{Error, Result};
use crate::stats::{
    classify_effect, compare_conditions, correlate, ComparisonResult, Condition, ConditionEffect,
    CorrelationPair, CorrelationResult, DemographicAxis, EffectClass,
};

pub use catalog::{standard_battery, standard_concepts, synthetic_archive, STANDARD_CONCEPT_COUNT};
pub use manifest::{
    diff_results, emit_provenance, read_manifest, ResultDiff, RunManifest, TestSeed,
};
pub use reference::{normalize_label, ReferenceData, ReferenceTable};

pub const SCHEMA_VERSION: u32 = 1;

/// Fewest joined labels a correlation accepts.
pub const MIN_CORRELATION_PAIRS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VeatSpec {
    pub name: String,
    pub x: String,
    pub y: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScveatSpec {
    pub name: String,
    pub x: String,
    pub a: String,
    pub b: String,
    /// Join key against reference tables; defaults to `x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Tests sharing a group are correlated and compared together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default)]
    pub condition: Condition,
}

impl ScveatSpec {
    pub fn join_label(&self) -> String {
        normalize_label(self.label.as_deref().unwrap_or(&self.x))
    }
}

/// Reference column a correlation uses as its second variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceAxis {
    PctMale,
    PctWomen,
    PctWhite,
    PctBlack,
    PctNonBlack,
    ValenceMean,
}

impl ReferenceAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceAxis::ValenceMean => "valence_mean",
            other => other
                .demographic()
                .map(DemographicAxis::as_str)
                .unwrap_or_default(),
        }
    }

    pub fn demographic(self) -> Option<DemographicAxis> {
        Some(match self {
            ReferenceAxis::PctMale => DemographicAxis::PctMale,
            ReferenceAxis::PctWomen => DemographicAxis::PctWomen,
            ReferenceAxis::PctWhite => DemographicAxis::PctWhite,
            ReferenceAxis::PctBlack => DemographicAxis::PctBlack,
            ReferenceAxis::PctNonBlack => DemographicAxis::PctNonBlack,
            ReferenceAxis::ValenceMean => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub group: String,
    pub reference: ReferenceTable,
    pub axis: ReferenceAxis,
    #[serde(default)]
    pub condition: Condition,
}

/// On-disk battery description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub schema_version: u32,
    /// Relative paths resolve against the config file's directory.
    pub archives: Vec<PathBuf>,
    #[serde(default)]
    pub permutation: PermutationConfig,
    #[serde(default)]
    pub std_divisor: StdDivisor,
    #[serde(default)]
    pub veat_tests: Vec<VeatSpec>,
    #[serde(default)]
    pub scveat_tests: Vec<ScveatSpec>,
    #[serde(default)]
    pub correlations: Vec<CorrelationSpec>,
}

impl BatteryConfig {
    /// Every concept name referenced by a test, sorted.
    pub fn referenced_concepts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in &self.veat_tests {
            out.extend([&t.x, &t.y, &t.a, &t.b].map(String::clone));
        }
        for t in &self.scveat_tests {
            out.extend([&t.x, &t.a, &t.b].map(String::clone));
        }
        out
    }

    /// SHA-256 of the config's canonical JSON.
    pub fn sha256(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self).map_err(|source| Error::Json {
            context: "serializing battery config".into(),
            source,
        })?;
        Ok(reference::sha256_hex(&bytes))
    }

    pub fn test_names(&self) -> impl Iterator<Item = &str> {
        self.veat_tests
            .iter()
            .map(|t| t.name.as_str())
            .chain(self.scveat_tests.iter().map(|t| t.name.as_str()))
    }

    fn check_structure(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.permutation.validate()?;
        if self.veat_tests.is_empty() && self.scveat_tests.is_empty() {
            return Err(Error::EmptySet("battery defines no tests".into()));
        }
        let mut names = HashSet::new();
        for name in self.test_names() {
            if name.trim().is_empty() {
                return Err(Error::invalid("test names must not be empty"));
            }
            if !names.insert(name) {
                return Err(Error::Duplicate {
                    kind: "test name",
                    key: name.to_string(),
                });
            }
        }
        self.check_groups()?;
        for c in &self.correlations {
            let compatible = match c.reference {
                ReferenceTable::Oasis => c.axis == ReferenceAxis::ValenceMean,
                _ => c.axis != ReferenceAxis::ValenceMean,
            };
            if !compatible {
                return Err(Error::invalid(format!(
                    "correlation on group `{}`: axis {} does not exist in the {} table",
                    c.group,
                    c.axis.as_str(),
                    c.reference.as_str()
                )));
            }
            if !self
                .scveat_tests
                .iter()
                .any(|t| t.group.as_deref() == Some(&c.group))
            {
                return Err(Error::invalid(format!(
                    "correlation refers to group `{}`, which no SC-VEAT test uses",
                    c.group
                )));
            }
        }
        Ok(())
    }

    /// Labels are unique per (group, condition) and every debiased label has a control.
    fn check_groups(&self) -> Result<()> {
        let mut seen: HashSet<(&str, String, Condition)> = HashSet::new();
        for t in &self.scveat_tests {
            let Some(group) = t.group.as_deref() else {
                if t.condition != Condition::Control {
                    return Err(Error::invalid(format!(
                        "test `{}`: a condition other than control requires a group",
                        t.name
                    )));
                }
                continue;
            };
            if !seen.insert((group, t.join_label(), t.condition)) {
                return Err(Error::Duplicate {
                    kind: "group label condition",
                    key: format!("{group} / {} / {}", t.join_label(), t.condition),
                });
            }
        }
        for (group, label, condition) in &seen {
            if *condition != Condition::Control
                && !seen.contains(&(*group, label.clone(), Condition::Control))
            {
                return Err(Error::invalid(format!(
                    "group `{group}`: label `{label}` has a {condition} test but no control test"
                )));
            }
        }
        Ok(())
    }
}

/// Checksum and size of one archive a battery read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveDigest {
    pub path: String,
    pub sha256: String,
    pub records: usize,
}

/// A validated battery with its concept sets materialized.
#[derive(Debug, Clone)]
pub struct Battery {
    pub config: BatteryConfig,
    pub archives: Vec<ArchiveDigest>,
    sets: BTreeMap<String, ConceptSet>,
    reference: ReferenceData,
}

/// Reads and validates a battery config and every archive it lists.
pub fn load_battery(path: impl AsRef<Path>) -> Result<Battery> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: BatteryConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    resolve_battery(config, base)
}

/// Like [`load_battery`] for a config already in memory.
pub fn resolve_battery(config: BatteryConfig, base_dir: &Path) -> Result<Battery> {
    config.check_structure()?;
    if config.archives.is_empty() {
        return Err(Error::EmptySet("battery lists no archives".into()));
    }
    let mut embeddings = Vec::new();
    let mut digests = Vec::new();
    for rel in &config.archives {
        let full = if rel.is_absolute() {
            rel.clone()
        } else {
            base_dir.join(rel)
        };
        let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
        let records = read_archive(&full)?;
        digests.push(ArchiveDigest {
            path: rel.display().to_string(),
            sha256: reference::sha256_hex(&bytes),
            records: records.len(),
        });
        embeddings.extend(records);
    }
    Battery::build(config, embeddings, digests)
}

impl Battery {
    /// Builds a battery from embeddings already in memory; no archive digests are recorded.
    pub fn from_embeddings(config: BatteryConfig, embeddings: Vec<VideoEmbedding>) -> Result<Self> {
        config.check_structure()?;
        Self::build(config, embeddings, Vec::new())
    }

    fn build(
        config: BatteryConfig,
        embeddings: Vec<VideoEmbedding>,
        archives: Vec<ArchiveDigest>,
    ) -> Result<Self> {
        let mut keys = HashSet::new();
        for e in &embeddings {
            if !keys.insert((e.video_id.as_str(), e.concept.as_str())) {
                return Err(Error::Duplicate {
                    kind: "(video_id, concept) pair across archives",
                    key: format!("({}, {})", e.video_id, e.concept),
                });
            }
        }
        let mut groups = group_by_concept(embeddings);
        let available: Vec<String> = groups.keys().cloned().collect();
        let targets: HashSet<&str> = config
            .veat_tests
            .iter()
            .flat_map(|t| [t.x.as_str(), t.y.as_str()])
            .chain(config.scveat_tests.iter().map(|t| t.x.as_str()))
            .collect();
        let mut sets = BTreeMap::new();
        for name in config.referenced_concepts() {
            let members = groups
                .remove(&name)
                .ok_or_else(|| unknown_concept(&name, &available))?;
            let role = if targets.contains(name.as_str()) {
                Role::Target
            } else {
                Role::Attribute
            };
            sets.insert(name.clone(), ConceptSet::new(name, role, members)?);
        }
        let battery = Self {
            config,
            archives,
            sets,
            reference: ReferenceData::bundled()?,
        };
        battery.check_tests()?;
        Ok(battery)
    }

    fn check_tests(&self) -> Result<()> {
        let dims = |names: &[&str]| -> Result<()> {
            let dim = self.sets[names[0]].dim();
            for n in &names[1..] {
                let found = self.sets[*n].dim();
                if found != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found,
                    });
                }
            }
            Ok(())
        };
        let sizes = |l: &str, r: &str| -> Result<()> {
            let (left, right) = (self.sets[l].len(), self.sets[r].len());
            if left != right {
                return Err(Error::UnequalSizes { left, right });
            }
            Ok(())
        };
        for t in &self.config.veat_tests {
            dims(&[&t.x, &t.y, &t.a, &t.b])
                .and_then(|_| sizes(&t.x, &t.y))
                .map_err(|e| e.in_test(&t.name))?;
        }
        for t in &self.config.scveat_tests {
            dims(&[&t.x, &t.a, &t.b])
                .and_then(|_| sizes(&t.a, &t.b))
                .map_err(|e| e.in_test(&t.name))?;
        }
        Ok(())
    }

    pub fn concept_set(&self, name: &str) -> Option<&ConceptSet> {
        self.sets.get(name)
    }

    pub fn reference(&self) -> &ReferenceData {
        &self.reference
    }

    pub fn config_sha256(&self) -> Result<String> {
        self.config.sha256()
    }

    /// Seed for the named test, derived from the battery seed.
    pub fn test_seed(&self, name: &str) -> u64 {
        derive_seed(self.config.permutation.seed, name)
    }

    fn engine(&self, name: &str) -> EngineConfig {
        EngineConfig {
            permutation: PermutationConfig {
                seed: self.test_seed(name),
                ..self.config.permutation
            },
            std_divisor: self.config.std_divisor,
        }
    }
}

fn unknown_concept(name: &str, available: &[String]) -> Error {
    let mut scored: Vec<(f64, &String)> = available
        .iter()
        .map(|a| (strsim::normalized_levenshtein(name, a), a))
        .filter(|(s, _)| *s >= 0.5)
        .collect();
    scored.sort_by(|l, r| r.0.total_cmp(&l.0).then_with(|| l.1.cmp(r.1)));
    Error::UnknownConcept {
        name: name.to_string(),
        suggestions: scored.into_iter().take(3).map(|(_, a)| a.clone()).collect(),
        available: available.to_vec(),
    }
}

/// First 8 bytes of `sha256(seed_le || name)`, little-endian.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// One test's outcome with the names it was run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResult {
    pub name: String,
    pub x: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    pub a: String,
    pub b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub condition: Condition,
    pub effect_class: Option<EffectClass>,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCorrelation {
    pub group: String,
    pub reference: ReferenceTable,
    pub axis: ReferenceAxis,
    pub condition: Condition,
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonGroup {
    pub group: String,
    pub scenarios: Vec<ComparisonResult>,
}

/// Everything a battery run produces, in config order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryResults {
    pub schema_version: u32,
    pub tests: Vec<NamedResult>,
    pub correlations: Vec<NamedCorrelation>,
    pub comparisons: Vec<ComparisonGroup>,
}

impl BatteryResults {
    pub fn test(&self, name: &str) -> Option<&NamedResult> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// Pretty JSON exactly as written to `results.json`.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|source| Error::Json {
            context: "serializing results".into(),
            source,
        })?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(reference::sha256_hex(&self.to_json()?))
    }
}

enum Job<'a> {
    Veat(&'a VeatSpec),
    Scveat(&'a ScveatSpec),
}

/// Runs every test, then the correlations and condition comparisons.
///
/// `threads` pins the worker count; results do not depend on it.
pub fn run_battery(battery: &Battery, threads: Option<usize>) -> Result<BatteryResults> {
    match threads {
        None => run_inner(battery),
        Some(0) => Err(Error::invalid("thread count must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?
            .install(|| run_inner(battery)),
    }
}

fn run_inner(battery: &Battery) -> Result<BatteryResults> {
    let cfg = &battery.config;
    let jobs: Vec<Job> = cfg
        .veat_tests
        .iter()
        .map(Job::Veat)
        .chain(cfg.scveat_tests.iter().map(Job::Scveat))
        .collect();
    let tests = jobs
        .par_iter()
        .map(|job| run_job(battery, job))
        .collect::<Result<Vec<_>>>()?;
    let correlations = cfg
        .correlations
        .iter()
        .map(|c| run_correlation(battery, &tests, c))
        .collect::<Result<Vec<_>>>()?;
    let comparisons = run_comparisons(&tests)?;
    Ok(BatteryResults {
        schema_version: SCHEMA_VERSION,
        tests,
        correlations,
        comparisons,
    })
}

fn run_job(battery: &Battery, job: &Job) -> Result<NamedResult> {
    let set = |n: &str| &battery.sets[n];
    let (name, outcome) = match job {
        Job::Veat(t) => (
            &t.name,
            run_veat(
                set(&t.x),
                set(&t.y),
                set(&t.a),
                set(&t.b),
                &battery.engine(&t.name),
            ),
        ),
        Job::Scveat(t) => (
            &t.name,
            run_scveat(set(&t.x), set(&t.a), set(&t.b), &battery.engine(&t.name)),
        ),
    };
    let result = outcome.map_err(|e| e.in_test(name))?;
    let effect_class = result
        .effect_size
        .map(classify_effect)
        .transpose()
        .map_err(|e| e.in_test(name))?;
    Ok(match job {
        Job::Veat(t) => NamedResult {
            name: t.name.clone(),
            x: t.x.clone(),
            y: Some(t.y.clone()),
            a: t.a.clone(),
            b: t.b.clone(),
            label: None,
            group: None,
            condition: Condition::Control,
            effect_class,
            result,
        },
        Job::Scveat(t) => NamedResult {
            name: t.name.clone(),
            x: t.x.clone(),
            y: None,
            a: t.a.clone(),
            b: t.b.clone(),
            label: Some(t.join_label()),
            group: t.group.clone(),
            condition: t.condition,
            effect_class,
            result,
        },
    })
}

fn effect_of(t: &NamedResult) -> Result<f64> {
    t.result.effect_size.ok_or_else(|| {
        Error::Degenerate("effect size is undefined (zero spread)".into()).in_test(&t.name)
    })
}

fn run_correlation(
    battery: &Battery,
    tests: &[NamedResult],
    spec: &CorrelationSpec,
) -> Result<NamedCorrelation> {
    let reference = battery.reference();
    let context = || {
        format!(
            "correlation {} / {} / {} ({})",
            spec.group,
            spec.reference.as_str(),
            spec.axis.as_str(),
            spec.condition
        )
    };
    let mut pairs = Vec::new();
    for t in tests
        .iter()
        .filter(|t| t.group.as_deref() == Some(&spec.group) && t.condition == spec.condition)
    {
        let label = t.label.clone().unwrap_or_default();
        let value = match spec.axis.demographic() {
            Some(axis) => reference
                .demographic(spec.reference, &label)
                .map(|r| r.axis_value(axis)),
            None => reference.oasis_theme(&label).map(|o| Some(o.valence_mean)),
        };
        let value = match value {
            None => {
                return Err(Error::invalid(format!(
                    "{}: label `{label}` (test `{}`) is not in the {} table",
                    context(),
                    t.name,
                    spec.reference.as_str()
                )))
            }
            Some(None) => {
                return Err(Error::invalid(format!(
                    "{}: `{label}` has no {} value",
                    context(),
                    spec.axis.as_str()
                )))
            }
            Some(Some(v)) => v,
        };
        pairs.push(CorrelationPair {
            label,
            effect_size: effect_of(t)?,
            statistic_pct: value,
        });
    }
    if pairs.len() < MIN_CORRELATION_PAIRS {
        return Err(Error::invalid(format!(
            "{}: only {} labels joined, need at least {MIN_CORRELATION_PAIRS}",
            context(),
            pairs.len()
        )));
    }
    let result = correlate(pairs).map_err(|e| Error::invalid(format!("{}: {e}", context())))?;
    Ok(NamedCorrelation {
        group: spec.group.clone(),
        reference: spec.reference,
        axis: spec.axis,
        condition: spec.condition,
        result,
    })
}

/// Groups with at least one debiased test, in first-seen order.
fn run_comparisons(tests: &[NamedResult]) -> Result<Vec<ComparisonGroup>> {
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<&NamedResult>> = HashMap::new();
    for t in tests {
        if let Some(g) = t.group.as_deref() {
            members
                .entry(g)
                .or_insert_with(|| {
                    order.push(g);
                    Vec::new()
                })
                .push(t);
        }
    }
    let mut out = Vec::new();
    for group in order {
        let ts = &members[group];
        if ts.iter().all(|t| t.condition == Condition::Control) {
            continue;
        }
        let debiased: HashSet<&str> = ts
            .iter()
            .filter(|t| t.condition != Condition::Control)
            .filter_map(|t| t.label.as_deref())
            .collect();
        let effects = ts
            .iter()
            .filter(|t| t.label.as_deref().is_some_and(|l| debiased.contains(l)))
            .map(|t| {
                Ok(ConditionEffect {
                    scenario: t.label.clone().unwrap_or_default(),
                    condition: t.condition,
                    d: effect_of(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenarios = compare_conditions(&effects)
            .map_err(|e| Error::invalid(format!("comparison group `{group}`: {e}")))?;
        out.push(ComparisonGroup {
            group: group.to_string(),
            scenarios,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::write_archive;

    fn emb(concept: &str, i: usize, v: Vec<f64>) -> VideoEmbedding {
        VideoEmbedding::new(format!("{concept}-{i}"), concept, v, 1).unwrap()
    }

    fn toy_embeddings() -> Vec<VideoEmbedding> {
        let mut out = Vec::new();
        let dirs: [(&str, [f64; 3]); 6] = [
            ("a", [1.0, 0.1, 0.0]),
            ("b", [0.0, 1.0, 0.1]),
            ("nurse", [0.2, 1.0, 0.3]),
            ("doctor", [1.0, 0.3, 0.2]),
            ("janitor", [0.9, 0.5, 0.1]),
            ("lawyer", [0.8, 0.2, 0.6]),
        ];
        for (c, d) in dirs {
            for i in 0..4 {
                let jitter = 0.05 * (i as f64 + 1.0);
                out.push(emb(
                    c,
                    i,
                    vec![d[0] + jitter, d[1] - jitter * 0.5, d[2] + jitter * 0.3],
                ));
            }
        }
        for (c, d) in [
            ("nurse (debias1)", [0.6, 0.9, 0.3]),
            ("doctor (debias1)", [0.4, 0.9, 0.2]),
        ] {
            for i in 0..4 {
                let jitter = 0.07 * (i as f64 + 1.0);
                out.push(emb(c, i, vec![d[0] - jitter, d[1] + jitter, d[2]]));
            }
        }
        out
    }

    fn sc(name: &str, x: &str, label: &str, condition: Condition) -> ScveatSpec {
        ScveatSpec {
            name: name.into(),
            x: x.into(),
            a: "a".into(),
            b: "b".into(),
            label: Some(label.into()),
            group: Some("occ".into()),
            condition,
        }
    }

    fn toy_config() -> BatteryConfig {
        BatteryConfig {
            schema_version: 1,
            archives: vec![PathBuf::from("toy.jsonl")],
            permutation: PermutationConfig {
                iterations: 500,
                ..Default::default()
            },
            std_divisor: StdDivisor::Sample,
            veat_tests: vec![VeatSpec {
                name: "doctor vs nurse".into(),
                x: "doctor".into(),
                y: "nurse".into(),
                a: "a".into(),
                b: "b".into(),
            }],
            scveat_tests: vec![
                sc("nurse", "nurse", "Nurse", Condition::Control),
                sc("doctor", "doctor", "Doctor", Condition::Control),
                sc("janitor", "janitor", "Janitor", Condition::Control),
                sc("lawyer", "lawyer", "Lawyer", Condition::Control),
                sc("nurse d1", "nurse (debias1)", "Nurse", Condition::Debias1),
                sc(
                    "doctor d1",
                    "doctor (debias1)",
                    "Doctor",
                    Condition::Debias1,
                ),
            ],
            correlations: vec![CorrelationSpec {
                group: "occ".into(),
                reference: ReferenceTable::Occupations,
                axis: ReferenceAxis::PctMale,
                condition: Condition::Control,
            }],
        }
    }

    #[test]
    fn runs_toy_battery() {
        let battery = Battery::from_embeddings(toy_config(), toy_embeddings()).unwrap();
        assert_eq!(battery.concept_set("nurse").unwrap().role(), Role::Target);
        assert_eq!(battery.concept_set("a").unwrap().role(), Role::Attribute);
        let res = run_battery(&battery, None).unwrap();
        let names: Vec<&str> = res.tests.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "doctor vs nurse",
                "nurse",
                "doctor",
                "janitor",
                "lawyer",
                "nurse d1",
                "doctor d1"
            ]
        );
        assert_eq!(res.correlations.len(), 1);
        assert_eq!(res.correlations[0].result.n, 4);
        assert_eq!(res.comparisons.len(), 1);
        let scen: Vec<&str> = res.comparisons[0]
            .scenarios
            .iter()
            .map(|s| s.scenario.as_str())
            .collect();
        assert_eq!(scen, ["nurse", "doctor"]);
        let doctor = res.test("doctor").unwrap();
        assert_eq!(doctor.result.seed, derive_seed(0, "doctor"));
        let dd = res.comparisons[0].scenarios[1].debias1.as_ref().unwrap();
        assert_eq!(
            dd.d,
            res.test("doctor d1").unwrap().result.effect_size.unwrap()
        );
    }

    #[test]
    fn output_is_independent_of_threads() {
        let battery = Battery::from_embeddings(toy_config(), toy_embeddings()).unwrap();
        let one = run_battery(&battery, Some(1)).unwrap().to_json().unwrap();
        let four = run_battery(&battery, Some(4)).unwrap().to_json().unwrap();
        assert_eq!(one, four);
        assert!(run_battery(&battery, Some(0)).is_err());
    }

    #[test]
    fn unknown_concept_suggests_near_names() {
        let mut cfg = toy_config();
        cfg.scveat_tests[0].x = "nurze".into();
        let err = Battery::from_embeddings(cfg, toy_embeddings()).unwrap_err();
        match &err {
            Error::UnknownConcept {
                name,
                suggestions,
                available,
            } => {
                assert_eq!(name, "nurze");
                assert_eq!(suggestions[0], "nurse");
                assert!(available.contains(&"janitor".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("did you mean: nurse"));
    }

    #[test]
    fn structural_errors() {
        let mut cfg = toy_config();
        cfg.scveat_tests[1].name = "nurse".into();
        assert!(matches!(
            Battery::from_embeddings(cfg, toy_embeddings()),
            Err(Error::Duplicate {
                kind: "test name",
                ..
            })
        ));

        let mut cfg = toy_config();
        cfg.scveat_tests.remove(0);
        let err = Battery::from_embeddings(cfg, toy_embeddings()).unwrap_err();
        assert!(err.to_string().contains("no control test"), "{err}");

        let mut cfg = toy_config();
        cfg.schema_version = 2;
        assert!(Battery::from_embeddings(cfg, toy_embeddings()).is_err());

        let mut cfg = toy_config();
        cfg.correlations[0].axis = ReferenceAxis::ValenceMean;
        assert!(Battery::from_embeddings(cfg, toy_embeddings()).is_err());

        let mut cfg = toy_config();
        cfg.veat_tests.clear();
        cfg.scveat_tests.clear();
        cfg.correlations.clear();
        assert!(matches!(
            Battery::from_embeddings(cfg, toy_embeddings()),
            Err(Error::EmptySet(_))
        ));
    }

    #[test]
    fn dimension_mismatch_names_the_test() {
        let mut embs = toy_embeddings();
        for e in embs.iter_mut().filter(|e| e.concept == "lawyer") {
            e.vector.push(1.0);
            e.dim = 4;
        }
        let err = Battery::from_embeddings(toy_config(), embs).unwrap_err();
        assert!(
            matches!(&err, Error::Test { test, source } if test == "lawyer"
            && matches!(**source, Error::DimensionMismatch { .. }))
        );
    }

    #[test]
    fn correlation_needs_three_labels() {
        let mut cfg = toy_config();
        cfg.scveat_tests
            .retain(|t| t.name != "janitor" && t.name != "lawyer");
        let battery = Battery::from_embeddings(cfg, toy_embeddings()).unwrap();
        let err = run_battery(&battery, None).unwrap_err();
        assert!(err.to_string().contains("only 2 labels joined"), "{err}");
    }

    #[test]
    fn unmatched_label_fails_loudly() {
        let mut cfg = toy_config();
        cfg.scveat_tests[3].label = Some("astronaut".into());
        let battery = Battery::from_embeddings(cfg, toy_embeddings()).unwrap();
        let err = run_battery(&battery, None).unwrap_err();
        assert!(err.to_string().contains("`astronaut`"), "{err}");
    }

    #[test]
    fn loads_from_disk_with_relative_archive() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&toy_embeddings(), dir.path().join("toy.jsonl")).unwrap();
        let cfg_path = dir.path().join("battery.json");
        std::fs::write(
            &cfg_path,
            serde_json::to_string_pretty(&toy_config()).unwrap(),
        )
        .unwrap();
        let battery = load_battery(&cfg_path).unwrap();
        assert_eq!(battery.archives.len(), 1);
        assert_eq!(battery.archives[0].records, 32);
        assert_eq!(battery.archives[0].sha256.len(), 64);

        let mut cfg = toy_config();
        cfg.archives = vec!["missing.jsonl".into()];
        std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let err = load_battery(&cfg_path).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("missing.jsonl"));
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let text = r#"{"schema_version":1,"archives":[],"bogus":1}"#;
        assert!(serde_json::from_str::<BatteryConfig>(text).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_name() {
        assert_ne!(derive_seed(0, "a"), derive_seed(0, "b"));
        assert_ne!(derive_seed(0, "a"), derive_seed(1, "a"));
        assert_eq!(derive_seed(7, "x"), derive_seed(7, "x"));
    }
}
