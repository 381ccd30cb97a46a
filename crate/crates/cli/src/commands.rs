use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use veat_core::association::oracle::cross_check;
use veat_core::report::{significance_stars, write_report};
use veat_core::stats::{
    classify_effect, compare_conditions, correlate as correlate_pairs, fleiss_kappa, majority_vote,
    read_annotations, Condition, ConditionEffect, CorrelationPair,
};
use veat_core::study::{
    diff_results, emit_provenance, load_battery, normalize_label, resolve_battery, run_battery,
    standard_battery, standard_concepts, synthetic_archive, BatteryConfig, BatteryResults,
    ComparisonGroup, NamedCorrelation, NamedResult, ReferenceAxis, ReferenceData, ReferenceTable,
    ScveatSpec, VeatSpec,
};
use veat_core::{
    pool_frames, read_results, run_scveat, run_veat, verify_archive, write_archive, EngineConfig,
    Error, FrameSequence, Method, PermutationConfig, PoolMode, Result, TestResult,
};

use crate::Options;

/// Relative tolerance for `oracle-check`.
const ORACLE_TOLERANCE: f64 = 1e-12;

impl Options {
    fn permutation(&self, base: PermutationConfig) -> PermutationConfig {
        PermutationConfig {
            seed: self.seed.unwrap_or(base.seed),
            iterations: self.iterations.unwrap_or(base.iterations),
            exact_threshold: self.exact_threshold.unwrap_or(base.exact_threshold),
            tie_rule: self.tie_rule.unwrap_or(base.tie_rule),
        }
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            permutation: self.permutation(PermutationConfig::default()),
            std_divisor: self.std_divisor.unwrap_or_default(),
        }
    }
}

fn json_err(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> Error {
    let context = context.into();
    move |source| Error::Json { context, source }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(
    opts: &Options,
    results: &BatteryResults,
    manifest: Option<&veat_core::RunManifest>,
) -> Result<()> {
    if let Some(dir) = &opts.output_dir {
        for path in write_report(dir, results, manifest)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    video_id: String,
    concept: String,
    timestamps: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

pub fn pool(opts: &Options, frames: &Path, output: &Path) -> Result<()> {
    let mode = if opts.normalize_frames {
        PoolMode::MeanOfNormalized
    } else {
        PoolMode::Mean
    };
    let reader = BufReader::new(File::open(frames).map_err(io_err(frames))?);
    let mut pooled = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(frames))?;
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |message: String| Error::Parse {
            path: frames.to_path_buf(),
            line: idx + 1,
            message,
        };
        let rec: FrameRecord = serde_json::from_str(&line).map_err(|e| at_line(e.to_string()))?;
        let seq = FrameSequence::new(rec.video_id, rec.timestamps, rec.frames)
            .map_err(|e| at_line(e.to_string()))?;
        pooled.push(pool_frames(&seq, &rec.concept, mode).map_err(|e| at_line(e.to_string()))?);
    }
    write_archive(&pooled, output)?;
    println!("pooled {} videos into {}", pooled.len(), output.display());
    Ok(())
}

pub fn verify(archive: &Path) -> Result<()> {
    let report = verify_archive(archive)?;
    println!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{} failed verification",
            archive.display()
        )))
    }
}

pub enum Single {
    Veat {
        x: String,
        y: String,
        a: String,
        b: String,
    },
    Scveat {
        x: String,
        a: String,
        b: String,
    },
}

fn describe(t: &NamedResult) {
    let r = &t.result;
    println!("test: {}", t.name);
    println!("statistic: {}", r.statistic);
    match (r.effect_size, t.effect_class) {
        (Some(d), Some(class)) => println!("effect size (d): {d} ({class})"),
        _ => println!("effect size (d): NA (item scores have zero spread)"),
    }
    let how = match r.method {
        Method::Exact => format!("exact, {} of {} partitions", r.exceed_count, r.permutations),
        Method::MonteCarlo => format!(
            "monte carlo, {} of {} draws, seed {}",
            r.exceed_count, r.iterations, r.seed
        ),
    };
    println!(
        "p-value: {} {} ({how})",
        r.p_value,
        significance_stars(r.p_value)
    );
}

fn named(
    name: &str,
    x: &str,
    y: Option<&str>,
    a: &str,
    b: &str,
    result: TestResult,
) -> Result<NamedResult> {
    Ok(NamedResult {
        name: name.to_string(),
        x: x.to_string(),
        y: y.map(str::to_string),
        a: a.to_string(),
        b: b.to_string(),
        label: None,
        group: None,
        condition: Condition::Control,
        effect_class: result.effect_size.map(classify_effect).transpose()?,
        result,
    })
}

pub fn single(opts: &Options, archives: &[PathBuf], test: Single) -> Result<()> {
    let engine = opts.engine();
    let mut config = BatteryConfig {
        schema_version: veat_core::study::SCHEMA_VERSION,
        archives: archives.to_vec(),
        permutation: engine.permutation,
        std_divisor: engine.std_divisor,
        veat_tests: Vec::new(),
        scveat_tests: Vec::new(),
        correlations: Vec::new(),
    };
    match &test {
        Single::Veat { x, y, a, b } => config.veat_tests.push(VeatSpec {
            name: "veat".into(),
            x: x.clone(),
            y: y.clone(),
            a: a.clone(),
            b: b.clone(),
        }),
        Single::Scveat { x, a, b } => config.scveat_tests.push(ScveatSpec {
            name: "scveat".into(),
            x: x.clone(),
            a: a.clone(),
            b: b.clone(),
            label: None,
            group: None,
            condition: Condition::Control,
        }),
    }
    let battery = resolve_battery(config, Path::new(""))?;
    let set = |n: &str| {
        battery
            .concept_set(n)
            .expect("resolved battery holds every referenced set")
    };
    let result = match &test {
        Single::Veat { x, y, a, b } => named(
            "veat",
            x,
            Some(y),
            a,
            b,
            run_veat(set(x), set(y), set(a), set(b), &engine)?,
        )?,
        Single::Scveat { x, a, b } => named(
            "scveat",
            x,
            None,
            a,
            b,
            run_scveat(set(x), set(a), set(b), &engine)?,
        )?,
    };
    describe(&result);
    let results = BatteryResults {
        schema_version: veat_core::study::SCHEMA_VERSION,
        tests: vec![result],
        correlations: Vec::new(),
        comparisons: Vec::new(),
    };
    emit(opts, &results, None)
}

pub fn battery(opts: &Options, path: &Path, threads: Option<usize>) -> Result<()> {
    let mut battery = load_battery(path)?;
    battery.config.permutation = opts.permutation(battery.config.permutation);
    if let Some(d) = opts.std_divisor {
        battery.config.std_divisor = d;
    }
    let results = run_battery(&battery, threads)?;
    let manifest = emit_provenance(&battery, &results)?;
    for t in &results.tests {
        let d = t
            .result
            .effect_size
            .map(|d| format!("{d:.4}"))
            .unwrap_or_else(|| "NA".into());
        println!("{}, {d}, {}", t.name, significance_stars(t.result.p_value));
    }
    for c in &results.correlations {
        println!(
            "r({} ~ {} {}) = {:.4} (n = {})",
            c.group,
            c.reference.as_str(),
            c.axis.as_str(),
            c.result.r,
            c.result.n
        );
    }
    if opts.output_dir.is_none() {
        eprintln!("note: pass --output-dir to write results and the run manifest");
    }
    emit(opts, &results, Some(&manifest))
}

pub fn catalog(
    opts: &Options,
    archives: Vec<PathBuf>,
    output: Option<&Path>,
    synthetic: Option<&Path>,
    per_concept: usize,
    dim: usize,
) -> Result<()> {
    let archives = match (archives.is_empty(), synthetic) {
        (true, Some(path)) => vec![path.to_path_buf()],
        _ => archives,
    };
    let config = standard_battery(archives, opts.permutation(PermutationConfig::default()))?;
    if let Some(path) = synthetic {
        let embeddings = synthetic_archive(
            &standard_concepts()?,
            per_concept,
            dim,
            opts.seed.unwrap_or(0),
        )?;
        write_archive(&embeddings, path)?;
        eprintln!(
            "wrote synthetic archive {} ({} videos)",
            path.display(),
            embeddings.len()
        );
    }
    let text =
        serde_json::to_string_pretty(&config).map_err(json_err("serializing battery"))? + "\n";
    match output {
        Some(path) => std::fs::write(path, text).map_err(io_err(path))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Deserialize)]
struct EffectRow {
    label: String,
    effect_size: f64,
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        context: path.display().to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err)
}

fn correlate_rows(
    reference: &ReferenceData,
    rows: Vec<(String, f64)>,
    table: ReferenceTable,
    axis: ReferenceAxis,
) -> Result<NamedCorrelation> {
    let pairs = rows
        .into_iter()
        .map(|(label, d)| {
            let label = normalize_label(&label);
            let value = match axis.demographic() {
                Some(ax) => reference
                    .demographic(table, &label)
                    .and_then(|r| r.axis_value(ax)),
                None if table == ReferenceTable::Oasis => {
                    reference.oasis_theme(&label).map(|t| t.valence_mean)
                }
                None => None,
            };
            let value = value.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "label `{label}` has no {} value in the {} table",
                    axis.as_str(),
                    table.as_str()
                ))
            })?;
            Ok(CorrelationPair {
                label,
                effect_size: d,
                statistic_pct: value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.len() < veat_core::study::MIN_CORRELATION_PAIRS {
        return Err(Error::InvalidInput(format!(
            "only {} labels given, need at least {}",
            pairs.len(),
            veat_core::study::MIN_CORRELATION_PAIRS
        )));
    }
    Ok(NamedCorrelation {
        group: "input".into(),
        reference: table,
        axis,
        condition: Condition::Control,
        result: correlate_pairs(pairs)?,
    })
}

pub fn correlate(
    opts: &Options,
    effects: &Path,
    table: ReferenceTable,
    axis: ReferenceAxis,
) -> Result<()> {
    let rows: Vec<EffectRow> = read_csv(effects)?;
    let reference = ReferenceData::bundled()?;
    let c = correlate_rows(
        &reference,
        rows.into_iter().map(|r| (r.label, r.effect_size)).collect(),
        table,
        axis,
    )?;
    println!("r = {} (n = {})", c.result.r, c.result.n);
    let results = BatteryResults {
        schema_version: veat_core::study::SCHEMA_VERSION,
        tests: Vec::new(),
        correlations: vec![c],
        comparisons: Vec::new(),
    };
    emit(opts, &results, None)
}

#[derive(Deserialize)]
struct ConditionRow {
    scenario: String,
    condition: String,
    d: f64,
}

pub fn compare(opts: &Options, effects: &Path, group: &str) -> Result<()> {
    let rows: Vec<ConditionRow> = read_csv(effects)?;
    let effects = rows
        .into_iter()
        .map(|r| {
            Ok(ConditionEffect {
                scenario: r.scenario,
                condition: r.condition.parse()?,
                d: r.d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scenarios = compare_conditions(&effects)?;
    for s in &scenarios {
        let mut line = format!(
            "{}: control {:.4} ({})",
            s.scenario, s.d_control, s.control_class
        );
        for c in [Condition::Debias1, Condition::Debias2] {
            if let Some(sh) = s.shift(c) {
                line += &format!(
                    ", {c} {:.4} (delta {:+.4}{})",
                    sh.d,
                    sh.delta,
                    if sh.sign_flip { ", sign flip" } else { "" }
                );
            }
        }
        println!("{line}");
    }
    let results = BatteryResults {
        schema_version: veat_core::study::SCHEMA_VERSION,
        tests: Vec::new(),
        correlations: Vec::new(),
        comparisons: vec![ComparisonGroup {
            group: group.to_string(),
            scenarios,
        }],
    };
    emit(opts, &results, None)
}

pub fn agreement(path: &Path, votes: bool) -> Result<()> {
    let annotations = read_annotations(path)?;
    let kappa = fleiss_kappa(&annotations)?;
    let majority = majority_vote(&annotations)?;
    println!("fleiss kappa: {kappa}");
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for label in majority.values() {
        *tally.entry(label.as_str()).or_default() += 1;
    }
    for (label, n) in &tally {
        println!("majority {label}: {n}");
    }
    if votes {
        for (video, label) in &majority {
            println!("{video}\t{label}");
        }
    }
    Ok(())
}

pub fn oracle_check(opts: &Options, trials: usize) -> Result<()> {
    let report = cross_check(trials, opts.seed.unwrap_or(0), ORACLE_TOLERANCE)?;
    println!(
        "{} trials, max relative error {:e}, {} mismatches",
        report.trials,
        report.max_relative_error,
        report.mismatches.len()
    );
    for m in &report.mismatches {
        println!("  {m}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "engine disagrees with the reference implementation".into(),
        ))
    }
}

pub fn diff(left: &Path, right: &Path) -> Result<()> {
    let diffs = diff_results(&read_results(left)?, &read_results(right)?);
    if diffs.is_empty() {
        println!("no differences");
    }
    for d in diffs {
        println!("{}\t{}\t{}\t{}", d.test, d.field, d.left, d.right);
    }
    Ok(())
}
