use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ctr");

const RUN: &str = r#"{
  "synth": {"cardinalities": [6, 6, 6, 6, 6], "n_train": 1500, "n_test": 500, "linear_std": 0.5,
            "pairs": [{"fields": [0, 1], "weight": 1.0}, {"fields": [2, 3], "weight": 1.0}], "seed": 3},
  "data": {"train": "out/train.bin", "test": "out/test.bin", "schema": "out/schema.json"},
  "model": {"kind": "deepfm-d", "k": 4, "hidden": [16, 16]},
  "train": {"bs": 100, "lr": 0.005, "epochs": 2, "seed": 1}
}"#;

fn ctr(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("run ctr")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ctr(dir, args);
    assert!(out.status.success(), "ctr {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

/// A temp dir with `run.json` and indexed synthetic train/test data under `out/`.
fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), RUN).unwrap();
    ok(d, &["synth", "-c", "run.json"]);
    ok(d, &["index", "-c", "run.json", "--input", "out/train.tsv", "--output", "out/train.bin"]);
    ok(d, &["index", "-c", "run.json", "--input", "out/test.tsv", "--output", "out/test.bin", "--reuse-schema"]);
    dir
}

fn strip_timing(mut v: Value) -> Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("wall_time_s");
        o.remove("wall_time");
    }
    v
}

fn assert_header(report: &Value, command: &str) {
    let h = &report["header"];
    assert_eq!(h["command"], command);
    for key in ["config_hash", "schema_hash"] {
        let s = h[key].as_str().unwrap();
        assert_eq!(s.len(), 64);
        assert!(s.bytes().all(|b| b.is_ascii_hexdigit()));
    }
    assert!(h["seed"].is_u64());
    assert_eq!(report.as_object().unwrap().keys().next().unwrap(), "header");
}

#[test]
fn train_then_eval_round_trip() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["train", "-c", "run.json"]);
    for f in ["model.ckpt", "model.ckpt.json", "train_log.jsonl", "train_report.json"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    let train = json(d.join("out/train_report.json"));
    assert_header(&train, "train");
    assert_eq!(train["steps"], 30);
    let auc = train["test_eval"]["auc"].as_f64().unwrap();
    assert!(auc > 0.6, "{auc}");

    ok(d, &["eval", "-c", "run.json", "--checkpoint", "out/model.ckpt"]);
    let eval = json(d.join("out/eval_report.json"));
    assert_header(&eval, "eval");
    assert_eq!(eval["auc"].as_f64().unwrap(), auc);
    assert_eq!(eval["n"], 500);
    assert_eq!(eval["header"]["schema_hash"], train["header"]["schema_hash"]);

    let log = std::fs::read_to_string(d.join("out/train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 30);
}

#[test]
fn fixed_seed_runs_are_bit_reproducible() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["train", "-c", "run.json", "--out-dir", "a"]);
    ok(d, &["train", "-c", "run.json", "--out-dir", "b"]);
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/model.ckpt"), read("b/model.ckpt"));
    // output.dir differs, so compare everything below the header
    let (ra, rb) = (json(d.join("a/train_report.json")), json(d.join("b/train_report.json")));
    let body = |mut v: Value| {
        v.as_object_mut().unwrap().remove("header");
        strip_timing(v)
    };
    assert_eq!(body(ra), body(rb));
    let lines = |p: &str| -> Vec<Value> {
        std::fs::read_to_string(d.join(p))
            .unwrap()
            .lines()
            .map(|l| strip_timing(serde_json::from_str(l).unwrap()))
            .collect()
    };
    assert_eq!(lines("a/train_log.jsonl"), lines("b/train_log.jsonl"));

    // same directory twice: the whole report matches outside timing
    let before = json(d.join("a/train_report.json"));
    ok(d, &["train", "-c", "run.json", "--out-dir", "a"]);
    assert_eq!(strip_timing(json(d.join("a/train_report.json"))), strip_timing(before));
}

#[test]
fn invalid_model_kind_exits_2_without_outputs() {
    let dir = fixture();
    let d = dir.path();
    let out = ctr(d, &["train", "-c", "run.json", "--model", "deepfm-x", "--out-dir", "bad"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deepfm-x"));
    assert!(!d.join("bad").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = fixture();
    let d = dir.path();
    let cases: [&[&str]; 5] = [
        &["train", "-c", "run.json", "--set", "train.typo=1", "--out-dir", "bad"],
        &["train", "-c", "run.json", "--set", "nonsense=true", "--out-dir", "bad"],
        &["train", "-c", "missing.json", "--out-dir", "bad"],
        &["train", "-c", "run.json", "--set", "data.train=nowhere.bin", "--out-dir", "bad"],
        &["train", "-c", "run.json", "--model", "lr", "--out-dir", "bad"],
    ];
    for args in cases {
        assert_eq!(ctr(d, args).status.code(), Some(2), "{args:?}");
    }
    assert!(!d.join("bad").exists());
    assert_eq!(ctr(d, &["train", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = fixture();
    let d = dir.path();
    let out = ctr(d, &["train", "-c", "run.json", "--lr", "1e300", "--out-dir", "nan"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
    assert!(!d.join("nan").exists());
}

#[test]
fn flags_override_config_keys() {
    let dir = fixture();
    let d = dir.path();
    let args =
        ["train", "-c", "run.json", "--lr", "0.002", "--epochs", "1", "--workers", "4", "--lr-scale", "--out-dir", "o"];
    ok(d, &args);
    let r = json(d.join("o/train_report.json"));
    assert_eq!(r["train"]["lr"], 0.002);
    assert_eq!(r["train"]["epochs"], 1);
    assert_eq!(r["train"]["workers"], 4);
    assert_eq!(r["train"]["bs"], 100);
    assert_eq!(r["effective_lr"], 0.004);
    assert_eq!(r["steps"], 15);
    // √4 rule: every logged step uses twice the configured rate
    let log = std::fs::read_to_string(d.join("o/train_log.jsonl")).unwrap();
    for line in log.lines() {
        assert_eq!(serde_json::from_str::<Value>(line).unwrap()["lr"], 0.004);
    }
    ok(d, &["train", "-c", "run.json", "--set", "train.lr=0.002", "--epochs", "1", "--out-dir", "p"]);
    let p = json(d.join("p/train_report.json"));
    assert_ne!(p["header"]["config_hash"], r["header"]["config_hash"]);
    assert_eq!(p["header"]["seed"], 1);
}

#[test]
fn lr_trains_and_scores_its_own_training_data() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["train", "-c", "run.json", "--model", "lr", "--set", "model.k=0", "--set", "model.hidden=[]"]);
    ok(d, &["eval", "-c", "run.json", "--checkpoint", "out/model.ckpt", "--data", "out/train.bin"]);
    let r = json(d.join("out/eval_report.json"));
    assert_eq!(r["model"]["kind"], "lr");
    assert_eq!(r["n"], 1500);
    assert!(r["auc"].as_f64().unwrap() > 0.5);
}

#[test]
fn dropout_sweep_writes_six_rows() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["sweep", "-c", "run.json", "--epochs", "1", "--out-dir", "sw"]);
    let csv = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    let values: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values, ["1", "0.9", "0.8", "0.7", "0.6", "0.5"]);
    let r = json(d.join("sw/sweep_report.json"));
    assert_header(&r, "sweep");
    assert_eq!(r["rows"].as_array().unwrap().len(), 6);

    ok(
        d,
        &["sweep", "-c", "run.json", "--epochs", "1", "--axis", "hidden_layers", "--values", "1,2", "--out-dir", "hl"],
    );
    assert_eq!(json(d.join("hl/sweep_report.json"))["axis"], "hidden_layers");
    let out = ctr(d, &["sweep", "-c", "run.json", "--model", "fm", "--set", "model.hidden=[]", "--out-dir", "fm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_identical_checkpoints_give_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--epochs", "2", "--out-dir", "s1"]);
    let first = json(d.join("s1/ab_report.json"));
    assert_header(&first, "simulate");
    assert_eq!(first["rows"].as_array().unwrap().len(), 6);

    ok(d, &["simulate", "--epochs", "2", "--out-dir", "s2"]);
    assert_eq!(
        std::fs::read_to_string(d.join("s1/ab.csv")).unwrap(),
        std::fs::read_to_string(d.join("s2/ab.csv")).unwrap()
    );

    let args = [
        "simulate",
        "--catalog",
        "s1/catalog.json",
        "--checkpoint-a",
        "s1/model_b.ckpt",
        "--checkpoint-b",
        "s1/model_b.ckpt",
        "--out-dir",
        "same",
    ];
    ok(d, &args);
    let same = json(d.join("same/ab_report.json"));
    for row in same["deltas"].as_array().unwrap() {
        for key in ["personalization", "coverage", "popularity_mean", "popularity_variance", "ctr", "cvr"] {
            assert_eq!(row[key].as_f64().unwrap(), 0.0, "{key}");
        }
    }
    assert!(!d.join("same/model_a.ckpt").exists());

    // a checkpoint trained on another feature space is rejected
    let fx = fixture();
    let foreign: PathBuf = fx.path().join("out/model.ckpt");
    ok(fx.path(), &["train", "-c", "run.json", "--epochs", "1"]);
    let out = ctr(d, &["simulate", "--checkpoint-a", foreign.to_str().unwrap(), "--out-dir", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_reports_relative_costs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "bench",
        "--model",
        "deepfm-d",
        "--k",
        "4",
        "--hidden",
        "8",
        "--bs",
        "100",
        "--set",
        "bench.instances=3000",
        "--set",
        "bench.hidden=[8]",
        "--set",
        "bench.k=4",
        "--throttle-ms",
        "3",
        "--worker-counts",
        "1,2",
        "--out-dir",
        "b",
    ];
    ok(d, &args);
    let r = json(d.join("b/bench_report.json"));
    assert_header(&r, "bench");
    let models = r["models"].as_array().unwrap();
    assert_eq!(models.len(), 14);
    assert_eq!(models[0]["kind"], "lr");
    assert_eq!(models[0]["relative_to_lr"], 1.0);
    assert!(models.iter().all(|m| m["seconds"].as_f64().unwrap() > 0.0));
    assert_eq!(r["workers"][0]["speed_up"], 1.0);
    assert_eq!(r["workers"].as_array().unwrap().len(), 2);
    // 30 throttled batches: overlapping reads with compute cannot be slower
    let rate = r["reader"]["speed_up"].as_f64().unwrap();
    assert!(rate >= 1.0, "{rate}");
    let csv = std::fs::read_to_string(d.join("b/bench_models.csv")).unwrap();
    assert_eq!(csv.lines().count(), 15);
}

#[test]
fn index_handles_numeric_fields() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw: String = (0..50).map(|i| format!("{}\tu{}\t{}.5\tc{}\n", i % 2, i % 7, i, i % 3)).collect();
    std::fs::write(d.join("raw.tsv"), raw).unwrap();
    let base = ["index", "--input", "raw.tsv", "--output", "o/raw.bin", "--schema", "o/schema.json", "--out-dir", "o"];
    let mut args = base.to_vec();
    args.extend(["--numeric-fields", "1", "--numeric-policy", "quantiles:4"]);
    ok(d, &args);
    let r = json(d.join("o/index_report.json"));
    assert_header(&r, "index");
    assert_eq!(r["records"], 50);
    assert_eq!(r["num_fields"], 3);
    assert_eq!(std::fs::metadata(d.join("o/raw.bin")).unwrap().len(), 50 * (1 + 3 * 8));
    let schema = json(d.join("o/schema.json"));
    assert!(schema.to_string().contains("discretize"), "{schema}");

    let mut bad = base.to_vec();
    bad.extend(["--numeric-fields", "9"]);
    assert_eq!(ctr(d, &bad).status.code(), Some(2));
    let mut bad = base.to_vec();
    bad.extend(["--numeric-fields", "1", "--numeric-policy", "log"]);
    assert_eq!(ctr(d, &bad).status.code(), Some(2));
}
