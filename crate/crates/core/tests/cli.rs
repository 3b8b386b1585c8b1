mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{
    "freespace": {"duration_s": 60.0},
    "contact": {"duration_s": 20.0},
    "predictor": {"hidden_dim": 4, "window_len": 8, "max_epochs": 3, "windows_per_epoch": 300}
}"#;

fn forcesense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forcesense"))
        .args(args)
        .env_remove("FORCESENSE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run forcesense")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn gen_data_writes_manifest_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&forcesense(&[
            "gen-data",
            "--config",
            s(&cfg),
            "--out",
            s(out),
            "--profile",
            "si",
        ]));
    }
    let m = read_json(&a.join("manifest.json"));
    let entry = &m["datasets"][0];
    assert_eq!(entry["profile"], "si");
    assert_eq!(entry["bias_kind"], "ou_drift");
    assert_eq!(entry["freespace_rows"], 6000);
    assert_eq!(m["config_fingerprint"].as_str().unwrap().len(), 64);
    for f in ["freespace_si.csv", "contact_si.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(a.join("freespace_si.csv")).unwrap();
    assert!(csv.contains(&format!(
        "# config_fingerprint={}",
        m["config_fingerprint"].as_str().unwrap()
    )));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_forcesense"));
        c.args(["print-config", "--config", s(&cfg)])
            .env_remove("FORCESENSE_SEED");
        if let Some(v) = seed {
            c.env("FORCESENSE_SEED", v);
        }
        c.output().unwrap()
    };
    let base: Value = serde_json::from_slice(&run(None).stdout).unwrap();
    assert_eq!(base["seed"], 42);
    let over: Value = serde_json::from_slice(&run(Some("7")).stdout).unwrap();
    assert_eq!(over["seed"], 7);
    let bad = run(Some("seven"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn train_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    ok(&forcesense(&[
        "gen-data",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]));
    let free = out.join("freespace_classic.csv");
    let contact = out.join("contact_classic.csv");
    ok(&forcesense(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--data",
        s(&free),
    ]));

    let model = read_json(&out.join("model.json"));
    assert_eq!(model["format_version"], 1);
    assert_eq!(model["joints"].as_array().unwrap().len(), 6);
    let epochs: usize = model["joints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|j| j["history"].as_array().unwrap().len())
        .sum();
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let rows = history.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, epochs);

    let eval_dir = dir.path().join("eval");
    let model_path = out.join("model.json");
    let nn = [
        "eval",
        "--config",
        s(&cfg),
        "--out",
        s(&eval_dir),
        "--method",
        "nn",
    ];
    let args: Vec<&str> = nn
        .iter()
        .copied()
        .chain(["--data", s(&contact), "--model", s(&model_path)])
        .collect();
    ok(&forcesense(&args));
    let first = fs::read(eval_dir.join("metrics.json")).unwrap();
    ok(&forcesense(&args));
    assert_eq!(first, fs::read(eval_dir.join("metrics.json")).unwrap());
    let m: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(m["method"], "nn");
    assert!(m["axes"]
        .as_array()
        .unwrap()
        .iter()
        .all(|a| a["rmse"].as_f64().unwrap().is_finite()));

    for method in ["bias", "vector_search"] {
        ok(&forcesense(&[
            "eval",
            "--config",
            s(&cfg),
            "--out",
            s(&eval_dir),
            "--method",
            method,
            "--data",
            s(&contact),
            "--train-data",
            s(&free),
        ]));
        assert_eq!(read_json(&eval_dir.join("metrics.json"))["method"], method);
    }

    // usage mismatches
    let no_model = forcesense(&[
        "eval",
        "--config",
        s(&cfg),
        "--method",
        "nn",
        "--data",
        s(&contact),
    ]);
    assert_eq!(no_model.status.code(), Some(2));
    let stray = forcesense(&[
        "eval",
        "--config",
        s(&cfg),
        "--method",
        "bias",
        "--data",
        s(&contact),
        "--train-data",
        s(&free),
        "--model",
        s(&model_path),
    ]);
    assert_eq!(stray.status.code(), Some(2));

    // k larger than the index
    let big_k = write_config(
        &dir.path().join("out"),
        r#"{"freespace": {"duration_s": 60.0}, "baselines": {"k": 1000000}}"#,
    );
    let e = forcesense(&[
        "eval",
        "--config",
        s(&big_k),
        "--out",
        s(&eval_dir),
        "--method",
        "vector_search",
        "--data",
        s(&contact),
        "--train-data",
        s(&free),
    ]);
    assert_eq!(e.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&e.stderr);
    assert!(
        msg.contains("k = 1000000") && msg.contains("4800 indexed"),
        "{msg}"
    );

    // a free-space file is not an evaluation set
    let e = forcesense(&[
        "eval",
        "--out",
        s(&eval_dir),
        "--method",
        "measure_only",
        "--data",
        s(&free),
    ]);
    assert_eq!(e.status.code(), Some(3));
}

#[test]
fn train_rejects_window_longer_than_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"freespace": {"duration_s": 0.5}, "predictor": {"window_len": 45}}"#,
    );
    let out = dir.path().join("out");
    ok(&forcesense(&[
        "gen-data",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--profile",
        "classic",
    ]));
    let e = forcesense(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--data",
        s(&out.join("freespace_classic.csv")),
    ]);
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("train"));
}

#[test]
fn bench_with_method_filter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    ok(&forcesense(&[
        "bench",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--methods",
        "measure_only",
    ]));
    let report = read_json(&out.join("report.json"));
    for r in report["reports"].as_array().unwrap() {
        let methods = r["methods"].as_array().unwrap();
        assert_eq!(methods.len(), 1);
        assert_eq!(methods[0]["method"], "measure_only");
    }
    let table = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(!table.contains("vector_search"));
    for p in ["classic", "si"] {
        let trace = fs::read_to_string(out.join(format!("trace_{p}.csv"))).unwrap();
        assert!(trace.contains("measure_only_fx") && !trace.contains("nn_fx"));
    }
}

#[test]
fn bench_writes_every_declared_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    ok(&forcesense(&[
        "bench",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]));
    for f in [
        "report.json",
        "report.txt",
        "trace_classic.csv",
        "trace_si.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let table = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(common::table_arithmetic_error(&table) <= 1e-12);
    let fp = read_json(&out.join("report.json"))["config_fingerprint"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(table.contains(&fp));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), r#"{"predictor": {"hiden_dim": 3}}"#);
    let e = forcesense(&["bench", "--config", s(&unknown)]);
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("hiden_dim"));

    let missing = dir.path().join("nope.csv");
    let e = forcesense(&["train", "--out", s(dir.path()), "--data", s(&missing)]);
    assert_eq!(e.status.code(), Some(3));

    // no dwell segments: the bias fit finds no stationary sample
    let cfg = write_config(
        dir.path(),
        r#"{"freespace": {"duration_s": 30.0, "dwell": null}, "contact": {"probe_rest_pose": null}, "methods": ["bias"]}"#,
    );
    let e = forcesense(&[
        "bench",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(e.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&e.stderr).contains("fit-baselines"));

    let e = forcesense(&["frobnicate"]);
    assert_eq!(e.status.code(), Some(2));
}
