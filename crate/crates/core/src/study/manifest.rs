//! Run provenance and result diffs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::association::{PermutationConfig, StdDivisor};
use crate::error::{Error, Result};

use super::{reference, ArchiveDigest, Battery, BatteryResults};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSeed {
    pub name: String,
    pub seed: u64,
}

/// Everything needed to reproduce a battery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub config_sha256: String,
    pub archives: Vec<ArchiveDigest>,
    pub reference_sha256: BTreeMap<String, String>,
    pub permutation: PermutationConfig,
    pub std_divisor: StdDivisor,
    pub test_seeds: Vec<TestSeed>,
    pub results_sha256: String,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub created_unix: u64,
}

impl RunManifest {
    /// Names of fields that differ, ignoring `created_unix`.
    pub fn differences(&self, other: &RunManifest) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut check = |name, same: bool| {
            if !same {
                out.push(name);
            }
        };
        check("tool", self.tool == other.tool);
        check("tool_version", self.tool_version == other.tool_version);
        check(
            "schema_version",
            self.schema_version == other.schema_version,
        );
        check("config_sha256", self.config_sha256 == other.config_sha256);
        check("archives", self.archives == other.archives);
        check(
            "reference_sha256",
            self.reference_sha256 == other.reference_sha256,
        );
        check("permutation", self.permutation == other.permutation);
        check("std_divisor", self.std_divisor == other.std_divisor);
        check("test_seeds", self.test_seeds == other.test_seeds);
        check(
            "results_sha256",
            self.results_sha256 == other.results_sha256,
        );
        out
    }
}

pub fn emit_provenance(battery: &Battery, results: &BatteryResults) -> Result<RunManifest> {
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    Ok(RunManifest {
        tool: "veat".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        schema_version: results.schema_version,
        config_sha256: battery.config_sha256()?,
        archives: battery.archives.clone(),
        reference_sha256: reference::checksums()
            .into_iter()
            .map(|(name, sum)| (name.to_string(), sum))
            .collect(),
        permutation: battery.config.permutation,
        std_divisor: battery.config.std_divisor,
        test_seeds: battery
            .config
            .test_names()
            .map(|name| TestSeed {
                name: name.to_string(),
                seed: battery.test_seed(name),
            })
            .collect(),
        results_sha256: results.sha256()?,
        created_unix,
    })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

/// One field of one test that changed between two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDiff {
    pub test: String,
    pub field: String,
    pub left: String,
    pub right: String,
}

fn show<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

/// Per-test differences in statistic, effect size, p-value and test settings.
/// Tests present in only one run are reported under the field `presence`.
pub fn diff_results(left: &BatteryResults, right: &BatteryResults) -> Vec<ResultDiff> {
    let mut out = Vec::new();
    let mut push = |test: &str, field: &str, l: String, r: String| {
        if l != r {
            out.push(ResultDiff {
                test: test.to_string(),
                field: field.to_string(),
                left: l,
                right: r,
            });
        }
    };
    for l in &left.tests {
        let Some(r) = right.test(&l.name) else {
            push(&l.name, "presence", "present".into(), "absent".into());
            continue;
        };
        let (a, b) = (&l.result, &r.result);
        push(&l.name, "statistic", show(&a.statistic), show(&b.statistic));
        push(
            &l.name,
            "effect_size",
            show(&a.effect_size),
            show(&b.effect_size),
        );
        push(&l.name, "p_value", show(&a.p_value), show(&b.p_value));
        push(&l.name, "method", show(&a.method), show(&b.method));
        push(
            &l.name,
            "iterations",
            show(&a.iterations),
            show(&b.iterations),
        );
        push(&l.name, "seed", show(&a.seed), show(&b.seed));
    }
    for r in &right.tests {
        if left.test(&r.name).is_none() {
            push(&r.name, "presence", "absent".into(), "present".into());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::PermutationConfig;
    use crate::study::{run_battery, standard_battery, standard_concepts, synthetic_archive};

    fn small() -> (Battery, BatteryResults) {
        let perm = PermutationConfig {
            iterations: 100,
            ..Default::default()
        };
        let cfg = standard_battery(vec![], perm).unwrap();
        let embs = synthetic_archive(&standard_concepts().unwrap(), 4, 5, 3).unwrap();
        let battery = Battery::from_embeddings(cfg, embs).unwrap();
        let res = run_battery(&battery, None).unwrap();
        (battery, res)
    }

    #[test]
    fn manifests_match_apart_from_timestamp() {
        let (battery, res) = small();
        let a = emit_provenance(&battery, &res).unwrap();
        let mut b = emit_provenance(&battery, &run_battery(&battery, Some(2)).unwrap()).unwrap();
        b.created_unix += 100;
        assert!(a.differences(&b).is_empty());
        assert_eq!(a.test_seeds.len(), res.tests.len());
        assert_eq!(a.reference_sha256.len(), 5);
    }

    #[test]
    fn manifest_round_trips_through_disk() {
        let (battery, res) = small();
        let m = emit_provenance(&battery, &res).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&m).unwrap()).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
        assert!(read_manifest(dir.path().join("nope.json"))
            .unwrap_err()
            .is_io());
    }

    #[test]
    fn diff_reports_changed_fields() {
        let (_, res) = small();
        assert!(diff_results(&res, &res).is_empty());
        let mut other = res.clone();
        other.tests[0].result.p_value = 0.5;
        other.tests.pop();
        let d = diff_results(&res, &other);
        assert!(d
            .iter()
            .any(|x| x.field == "p_value" && x.test == res.tests[0].name));
        assert!(d.iter().any(|x| x.field == "presence"));
    }
}
