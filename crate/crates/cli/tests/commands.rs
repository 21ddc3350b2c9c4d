use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tunescape"));
    c.env("TUNESCAPE_THREADS", "1").env("RUST_LOG", "error");
    c
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("samples").join(name)
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().unwrap()
}

fn machine(args: &[&str]) -> Value {
    let out = cli().args(args).args(["--format", "machine"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unimodal_sample_has_perfect_fdc() {
    let data = sample("unimodal.csv");
    let meta = sample("unimodal.meta.json");
    let v = machine(&["features", "--data", s(&data), "--meta", s(&meta), "--exact"]);
    assert_eq!(v["tool"], "tunescape");
    assert_eq!(v["command"], "features");
    assert_eq!(v["result"]["exact"]["fdc"], 1.0);
    let inputs = v["manifest"]["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_metadata_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("bad.meta.json");
    fs::write(&meta, r#"{"options": [{"name": "a", "kind": "binary", "colour": 1}], "performance_column": "y", "direction": "minimize"}"#).unwrap();
    let data = sample("system.csv");
    let out = run(&["features", "--data", s(&data), "--meta", s(&meta)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn unknown_flag_value_is_an_input_error() {
    let out = run(&["synth", "--kind", "spiky", "--options", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn undefined_only_features_exit_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    let meta = dir.path().join("flat.meta.json");
    fs::write(&data, "a,b,y\n0,0,1\n1,1,2\n").unwrap();
    fs::write(
        &meta,
        r#"{"options": [{"name": "a", "kind": "binary"}, {"name": "b", "kind": "binary"}], "performance_column": "y", "direction": "minimize"}"#,
    )
    .unwrap();
    let out = run(&["features", "--data", s(&data), "--meta", s(&meta), "--exact"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_twice_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut contents = Vec::new();
    for tag in ["a", "b"] {
        let data = dir.path().join(format!("{tag}.csv"));
        let out = run(&["synth", "--kind", "rugged", "--options", "8", "--seed", "7", "--data-out", s(&data)]);
        assert!(out.status.success());
        let meta = dir.path().join(format!("{tag}.meta.json"));
        contents.push((fs::read(&data).unwrap(), fs::read(&meta).unwrap()));
    }
    assert_eq!(contents[0], contents[1]);
    assert_eq!(String::from_utf8_lossy(&contents[0].0).lines().count(), 257);
}

#[test]
fn dominate_percentages_sum_to_100() {
    let data = sample("system.csv");
    let meta = sample("system.meta.json");
    let v = machine(&[
        "dominate", "--data", s(&data), "--meta", s(&meta), "--repeats", "2", "--budget", "25", "--seed", "3",
    ]);
    let dp = &v["result"]["delta_p"];
    let n = dp["n"].as_u64().unwrap();
    assert_eq!(n as usize, v["result"]["pairs"].as_array().unwrap().len());
    if n > 0 {
        let total = dp["dg_win_pct"].as_f64().unwrap() + dp["dg_lose_pct"].as_f64().unwrap() + dp["tie_pct"].as_f64().unwrap();
        assert!((total - 100.0).abs() < 1e-9);
    }
}

#[test]
fn dominate_without_pairs_exits_zero() {
    let data = sample("system.csv");
    let meta = sample("system.meta.json");
    let out = run(&[
        "dominate", "--data", s(&data), "--meta", s(&meta), "--repeats", "1", "--budget", "25", "--models", "rf",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pairs 0"));
}

#[test]
fn budget_preset_is_recorded() {
    let data = sample("system.csv");
    let meta = sample("system.meta.json");
    let v = machine(&[
        "tune", "--data", s(&data), "--meta", s(&meta), "--repeats", "1", "--tuner", "random", "--model", "cart",
        "--budget-preset", "apache",
    ]);
    assert_eq!(v["manifest"]["params"]["budget"]["budget"], 271);
    assert_eq!(v["manifest"]["params"]["budget"]["preset"], "Apache");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"seed": 9, "repeats": 2, "models": "lr,knn"}"#).unwrap();
    let data = sample("system.csv");
    let meta = sample("system.meta.json");
    let v = machine(&["features", "--data", s(&data), "--meta", s(&meta), "--config", s(&cfg)]);
    assert_eq!(v["manifest"]["seed"], 9);
    assert_eq!(v["result"]["repeats"].as_array().unwrap().len(), 2);
    let models: Vec<&String> = v["result"]["models"].as_object().unwrap().keys().collect();
    assert_eq!(models, ["knn", "lr"]);
    let flagged = machine(&["features", "--data", s(&data), "--meta", s(&meta), "--config", s(&cfg), "--seed", "4"]);
    assert_eq!(flagged["manifest"]["seed"], 4);
}

#[test]
fn predictions_order_every_unlabelled_record() {
    let dir = tempfile::tempdir().unwrap();
    let records = sample("records.csv");
    let model = dir.path().join("ranker.json");
    let out = run(&["rank-train", "--records", s(&records), "--seed", "2", "--rounds", "20", "--save", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // strip the labels
    let text = fs::read_to_string(&records).unwrap();
    let unlabelled: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let cut = l.rfind(',').unwrap();
            if i == 0 { format!("{}\n", l) } else { format!("{},\n", &l[..cut]) }
        })
        .collect();
    let query = dir.path().join("query.csv");
    fs::write(&query, unlabelled).unwrap();
    let ordering = dir.path().join("ordering.csv");
    let v = machine(&["rank-predict", "--records", s(&query), "--model", s(&model), "--save", s(&ordering)]);
    let systems = v["result"]["systems"].as_array().unwrap();
    let total: usize = systems.iter().map(|s| s["ordering"].as_array().unwrap().len()).sum();
    assert_eq!(total, text.lines().count() - 1);
    for sys in systems {
        let scores: Vec<f64> = sys["ordering"].as_array().unwrap().iter().map(|o| o["score"].as_f64().unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        assert!(sys["ordering"][0]["y"].is_null());
    }
    assert_eq!(fs::read_to_string(&ordering).unwrap().lines().count(), total + 1);
}

#[test]
fn rank_eval_needs_three_systems() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(sample("records.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let mut keep: Vec<&str> = lines.clone().map(|l| l.split(',').next().unwrap()).collect();
    keep.dedup();
    keep.truncate(2);
    let filtered: Vec<&str> = lines.filter(|l| keep.contains(&l.split(',').next().unwrap())).collect();
    let path = dir.path().join("two.csv");
    fs::write(&path, format!("{header}\n{}\n", filtered.join("\n"))).unwrap();
    let out = run(&["rank-eval", "--records", s(&path), "--repeats", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table_goes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("table.txt");
    let out = run(&["synth", "--kind", "unimodal", "--options", "3", "--out", s(&out_path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(&out_path).unwrap().starts_with("kind"));
}
