//! Tables and files written after a run.
//!
//! CSV and JSON keep full `f64` precision (shortest round-trip form);
//! `report.md` rounds to four decimals for reading.

use std::fs;
use std::path::{Path, PathBuf};

use crate::association::TestKind;
use crate::error::{Error, Result};
use crate::stats::{ComparisonResult, Condition};
use crate::study::{BatteryResults, NamedResult, RunManifest};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const CORRELATIONS_CSV: &str = "correlations.csv";
pub const COMPARISONS_CSV: &str = "comparisons.csv";
pub const REPORT_MD: &str = "report.md";
pub const MANIFEST_JSON: &str = "manifest.json";

const NA: &str = "NA";

pub const RESULT_COLUMNS: [&str; 19] = [
    "test",
    "kind",
    "x",
    "y",
    "a",
    "b",
    "label",
    "group",
    "condition",
    "statistic",
    "effect_size",
    "effect_class",
    "p_value",
    "method",
    "iterations",
    "exceed_count",
    "permutations",
    "seed",
    "std_divisor",
];

pub const CORRELATION_COLUMNS: [&str; 6] = ["group", "reference", "axis", "condition", "n", "r"];

pub const COMPARISON_COLUMNS: [&str; 8] = [
    "group",
    "scenario",
    "condition",
    "d",
    "delta",
    "class",
    "sign_flip",
    "magnitude_increased",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.to_string()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| NA.to_string())
}

fn label<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05, otherwise `ns`.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

pub fn results_table(results: &BatteryResults) -> Vec<Vec<String>> {
    results
        .tests
        .iter()
        .map(|t| {
            let r = &t.result;
            vec![
                t.name.clone(),
                label(&r.kind),
                t.x.clone(),
                t.y.clone().unwrap_or_default(),
                t.a.clone(),
                t.b.clone(),
                t.label.clone().unwrap_or_default(),
                t.group.clone().unwrap_or_default(),
                t.condition.to_string(),
                num(r.statistic),
                opt_num(r.effect_size),
                t.effect_class
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| NA.into()),
                num(r.p_value),
                label(&r.method),
                r.iterations.to_string(),
                r.exceed_count.to_string(),
                r.permutations.to_string(),
                r.seed.to_string(),
                label(&r.std_divisor),
            ]
        })
        .collect()
}

pub fn correlation_table(results: &BatteryResults) -> Vec<Vec<String>> {
    results
        .correlations
        .iter()
        .map(|c| {
            vec![
                c.group.clone(),
                c.reference.as_str().to_string(),
                c.axis.as_str().to_string(),
                c.condition.to_string(),
                c.result.n.to_string(),
                num(c.result.r),
            ]
        })
        .collect()
}

fn comparison_rows(group: &str, s: &ComparisonResult) -> Vec<Vec<String>> {
    Condition::ALL
        .iter()
        .map(|&c| {
            let shift = s.shift(c);
            let (delta, class, flip, grew) = match (c, shift) {
                (Condition::Control, _) => (
                    NA.to_string(),
                    s.control_class.to_string(),
                    NA.to_string(),
                    NA.to_string(),
                ),
                (_, Some(sh)) => (
                    num(sh.delta),
                    sh.class.to_string(),
                    sh.sign_flip.to_string(),
                    sh.magnitude_increased.to_string(),
                ),
                (_, None) => (NA.into(), NA.into(), NA.into(), NA.into()),
            };
            vec![
                group.to_string(),
                s.scenario.clone(),
                c.to_string(),
                opt_num(s.d(c)),
                delta,
                class,
                flip,
                grew,
            ]
        })
        .collect()
}

/// Long format: one row per (group, scenario, condition); missing conditions read `NA`.
pub fn comparison_table(results: &BatteryResults) -> Vec<Vec<String>> {
    results
        .comparisons
        .iter()
        .flat_map(|g| {
            g.scenarios
                .iter()
                .flat_map(|s| comparison_rows(&g.group, s))
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        context: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn summary_line(t: &NamedResult) -> String {
    let d = t
        .result
        .effect_size
        .map(|d| format!("{d:.4}"))
        .unwrap_or_else(|| NA.into());
    format!("{}, {d}, {}", t.name, significance_stars(t.result.p_value))
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = md_row(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    s += &md_row(&header.iter().map(|_| "---".to_string()).collect::<Vec<_>>());
    for r in rows {
        s += &md_row(&r);
    }
    s
}

fn f4(v: Option<f64>) -> String {
    v.filter(|v| v.is_finite())
        .map(|v| format!("{v:.4}"))
        .unwrap_or_else(|| NA.into())
}

/// Human-readable summary with values rounded to four decimals.
pub fn render_markdown(results: &BatteryResults, manifest: Option<&RunManifest>) -> String {
    let mut md = String::from("# VEAT report\n\n");
    if let Some(m) = manifest {
        md += &format!(
            "Generated by {} {}. Config sha256 `{}`; results sha256 `{}`.\n\n",
            m.tool, m.tool_version, m.config_sha256, m.results_sha256
        );
    }

    md += "## Summary\n\n```\n";
    for t in &results.tests {
        md += &summary_line(t);
        md.push('\n');
    }
    md += "```\n\nSignificance: `***` p < 0.001, `**` p < 0.01, `*` p < 0.05.\n\n";

    let kinds = [
        (TestKind::Veat, "## VEAT\n\n"),
        (TestKind::Scveat, "## SC-VEAT\n\n"),
    ];
    for (kind, heading) in kinds {
        let rows: Vec<Vec<String>> = results
            .tests
            .iter()
            .filter(|t| t.result.kind == kind)
            .map(|t| {
                vec![
                    t.name.clone(),
                    f4(t.result.effect_size),
                    t.effect_class
                        .map(|c| c.to_string())
                        .unwrap_or_else(|| NA.into()),
                    f4(Some(t.result.p_value)),
                    significance_stars(t.result.p_value).to_string(),
                    label(&t.result.method),
                ]
            })
            .collect();
        if !rows.is_empty() {
            md += heading;
            md += &md_table(&["test", "d", "class", "p", "sig", "method"], rows);
            md.push('\n');
        }
    }

    if !results.correlations.is_empty() {
        md += "## Correlations\n\n";
        md += &md_table(
            &["group", "reference", "axis", "condition", "n", "r"],
            results.correlations.iter().map(|c| {
                vec![
                    c.group.clone(),
                    c.reference.as_str().into(),
                    c.axis.as_str().into(),
                    c.condition.to_string(),
                    c.result.n.to_string(),
                    f4(Some(c.result.r)),
                ]
            }),
        );
        md.push('\n');
    }

    if !results.comparisons.is_empty() {
        md += "## Debiasing comparisons\n\n";
        md += &md_table(
            &[
                "group",
                "scenario",
                "control",
                "debias1",
                "debias2",
                "sign flips",
            ],
            results.comparisons.iter().flat_map(|g| {
                g.scenarios.iter().map(|s| {
                    let flips: Vec<&str> = [Condition::Debias1, Condition::Debias2]
                        .into_iter()
                        .filter(|&c| s.shift(c).is_some_and(|sh| sh.sign_flip))
                        .map(Condition::as_str)
                        .collect();
                    vec![
                        g.group.clone(),
                        s.scenario.clone(),
                        f4(Some(s.d_control)),
                        f4(s.d(Condition::Debias1)),
                        f4(s.d(Condition::Debias2)),
                        if flips.is_empty() {
                            "-".into()
                        } else {
                            flips.join(", ")
                        },
                    ]
                })
            }),
        );
        md.push('\n');
    }
    md
}

/// Writes every report file into `dir`, creating it if needed, and returns the paths written.
/// `correlations.csv` and `comparisons.csv` are omitted when empty; `manifest.json` when `manifest` is `None`.
pub fn write_report(
    dir: &Path,
    results: &BatteryResults,
    manifest: Option<&RunManifest>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(RESULTS_JSON);
    fs::write(&path, results.to_json()?).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join(RESULTS_CSV);
    write_csv(&path, &RESULT_COLUMNS, &results_table(results))?;
    written.push(path);

    if !results.correlations.is_empty() {
        let path = dir.join(CORRELATIONS_CSV);
        write_csv(&path, &CORRELATION_COLUMNS, &correlation_table(results))?;
        written.push(path);
    }
    if !results.comparisons.is_empty() {
        let path = dir.join(COMPARISONS_CSV);
        write_csv(&path, &COMPARISON_COLUMNS, &comparison_table(results))?;
        written.push(path);
    }

    let path = dir.join(REPORT_MD);
    fs::write(&path, render_markdown(results, manifest)).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if let Some(m) = manifest {
        let path = dir.join(MANIFEST_JSON);
        let mut bytes = serde_json::to_vec_pretty(m).map_err(|source| Error::Json {
            context: "serializing manifest".into(),
            source,
        })?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads back a `results.json`.
pub fn read_results(path: impl AsRef<Path>) -> Result<BatteryResults> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}
