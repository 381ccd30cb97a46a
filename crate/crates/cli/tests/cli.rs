use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn veat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veat"))
        .args(args)
        .current_dir(dir)
        .env_remove("VEAT_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Four concepts of three 3-d vectors each.
fn write_toy_archive(dir: &Path) {
    let sets: [(&str, [[f64; 3]; 3]); 4] = [
        ("x", [[1.0, 0.2, 0.0], [0.9, 0.1, 0.3], [1.0, 0.0, 0.1]]),
        ("y", [[0.1, 1.0, 0.2], [0.3, 0.9, 0.0], [0.0, 1.0, 0.4]]),
        ("a", [[1.0, 0.0, 0.0], [0.8, 0.1, 0.2], [0.9, 0.3, 0.1]]),
        ("b", [[0.0, 1.0, 0.0], [0.2, 0.8, 0.1], [0.1, 0.9, 0.3]]),
    ];
    let mut text = String::new();
    for (concept, vs) in sets {
        for (i, v) in vs.iter().enumerate() {
            text += &format!(
                "{{\"video_id\":\"{concept}{i}\",\"concept\":\"{concept}\",\"dim\":3,\"n_frames\":1,\"vector\":[{},{},{}]}}\n",
                v[0], v[1], v[2]
            );
        }
    }
    fs::write(dir.join("toy.jsonl"), text).unwrap();
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = veat(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("scveat"));
    assert_eq!(code(&veat(dir.path(), &["veat", "--help"])), 0);
    assert_eq!(code(&veat(dir.path(), &["--no-such-flag"])), 1);
    assert_eq!(code(&veat(dir.path(), &["veat", "--x", "x"])), 1);
    assert_eq!(code(&veat(dir.path(), &["veat", "--tie-rule", "loose"])), 1);
}

#[test]
fn missing_archive_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = veat(
        dir.path(),
        &[
            "scveat",
            "--archive",
            "absent.jsonl",
            "--x",
            "x",
            "--a",
            "a",
            "--b",
            "b",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent.jsonl"), "{}", stderr(&o));
}

#[test]
fn unknown_concept_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_archive(dir.path());
    let o = veat(
        dir.path(),
        &[
            "scveat",
            "--archive",
            "toy.jsonl",
            "--x",
            "x",
            "--a",
            "a",
            "--b",
            "bb",
        ],
    );
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("unknown concept `bb`"), "{err}");
    assert!(err.contains("did you mean: b"), "{err}");
}

#[test]
fn veat_runs_exact_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_archive(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_veat"))
        .args([
            "veat",
            "--archive",
            "toy.jsonl",
            "--x",
            "x",
            "--y",
            "y",
            "--a",
            "a",
            "--b",
            "b",
        ])
        .current_dir(dir.path())
        .env("VEAT_OUTPUT_DIR", "out")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("exact, 0 of 20 partitions"), "{out}");
    assert!(out.contains("p-value: 0 "), "{out}");
    for f in ["results.json", "results.csv", "report.md"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn flags_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_archive(dir.path());
    fs::write(
        dir.path().join("flags.json"),
        r#"{"seed": 42, "iterations": 99, "exact_threshold": 1, "tie_rule": "plus-one"}"#,
    )
    .unwrap();
    let base = [
        "--config",
        "flags.json",
        "scveat",
        "--archive",
        "toy.jsonl",
        "--x",
        "x",
        "--a",
        "a",
        "--b",
        "b",
    ];
    let o = veat(dir.path(), &base);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("of 99 draws, seed 42"),
        "{}",
        stdout(&o)
    );
    let mut args = base.to_vec();
    args.extend(["--seed", "7"]);
    let o = veat(dir.path(), &args);
    assert!(stdout(&o).contains("of 99 draws, seed 7"), "{}", stdout(&o));

    fs::write(dir.path().join("bad.json"), r#"{"sed": 1}"#).unwrap();
    let o = veat(
        dir.path(),
        &["--config", "bad.json", "oracle-check", "--trials", "1"],
    );
    assert_eq!(code(&o), 1);
    let o = veat(
        dir.path(),
        &["--config", "gone.json", "oracle-check", "--trials", "1"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn pool_writes_an_archive() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("frames.jsonl"),
        "{\"video_id\":\"v1\",\"concept\":\"c\",\"timestamps\":[0.0,0.5],\"frames\":[[2.0,0.0],[0.0,4.0]]}\n\
         {\"video_id\":\"v2\",\"concept\":\"c\",\"timestamps\":[0.0],\"frames\":[[1.0,1.0]]}\n",
    )
    .unwrap();
    let o = veat(
        dir.path(),
        &["pool", "--frames", "frames.jsonl", "-o", "mean.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("mean.jsonl")).unwrap();
    assert!(text.contains("\"vector\":[1.0,2.0]"), "{text}");
    let o = veat(
        dir.path(),
        &[
            "pool",
            "--normalize-frames",
            "--frames",
            "frames.jsonl",
            "-o",
            "norm.jsonl",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("norm.jsonl")).unwrap();
    assert!(text.contains("\"vector\":[0.5,0.5]"), "{text}");

    fs::write(dir.path().join("broken.jsonl"), "{\"video_id\":\"v\"}\n").unwrap();
    let o = veat(
        dir.path(),
        &["pool", "--frames", "broken.jsonl", "-o", "x.jsonl"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("broken.jsonl:1"), "{}", stderr(&o));
}

#[test]
fn battery_is_thread_independent_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = veat(
        dir.path(),
        &[
            "catalog",
            "--synthetic",
            "synth.jsonl",
            "--per-concept",
            "4",
            "--dim",
            "4",
            "--iterations",
            "200",
            "-o",
            "battery.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for (threads, out) in [("1", "one"), ("3", "three")] {
        let o = veat(
            dir.path(),
            &[
                "battery",
                "battery.json",
                "--threads",
                threads,
                "--output-dir",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let one = fs::read(dir.path().join("one/results.json")).unwrap();
    let three = fs::read(dir.path().join("three/results.json")).unwrap();
    assert_eq!(one, three);
    for f in [
        "manifest.json",
        "correlations.csv",
        "comparisons.csv",
        "report.md",
    ] {
        assert!(dir.path().join("one").join(f).exists(), "{f}");
    }
    let o = veat(
        dir.path(),
        &["diff", "one/results.json", "three/results.json"],
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("no differences"));
}

#[test]
fn agreement_compare_and_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("ann.csv"),
        "video_id,annotator_id,category\nv1,r1,male\nv1,r2,male\nv2,r1,female\nv2,r2,female\n",
    )
    .unwrap();
    let o = veat(p, &["agreement", "--annotations", "ann.csv", "--votes"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("fleiss kappa: 1\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains("v2\tfemale"));

    fs::write(
        p.join("cond.csv"),
        "scenario,condition,d\nnurse,control,-1.2\nnurse,debias1,0.4\n",
    )
    .unwrap();
    let o = veat(
        p,
        &["compare", "--effects", "cond.csv", "--output-dir", "cmp"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("sign flip"));
    assert!(p.join("cmp/comparisons.csv").exists());

    fs::write(
        p.join("eff.csv"),
        "label,effect_size\nNurse,-1.5\nDoctor,1.1\nJanitor,0.9\nCashier,-0.7\n",
    )
    .unwrap();
    let o = veat(
        p,
        &[
            "correlate",
            "--effects",
            "eff.csv",
            "--reference",
            "occupations",
            "--axis",
            "pct-male",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("(n = 4)"));
    fs::write(
        p.join("few.csv"),
        "label,effect_size\nNurse,-1.5\nDoctor,1.1\n",
    )
    .unwrap();
    let o = veat(
        p,
        &[
            "correlate",
            "--effects",
            "few.csv",
            "--reference",
            "occupations",
            "--axis",
            "pct-male",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = veat(
        dir.path(),
        &["oracle-check", "--trials", "30", "--seed", "5"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("30 trials"));
    assert!(stdout(&o).contains("0 mismatches"));
}

#[test]
fn verify_archive_command() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_archive(dir.path());
    let o = veat(dir.path(), &["verify", "toy.jsonl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("OK, 12 records, 4 concepts"));
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"video_id\":\"v\",\"concept\":\"c\",\"dim\":2,\"vector\":[1.0,2.0]}\n",
    )
    .unwrap();
    let o = veat(dir.path(), &["verify", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("line 1"));
}
