use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aim")).args(args).current_dir(dir).output().expect("aim runs")
}

fn config(extra: &str) -> String {
    format!(
        r#"
[data]
path = "data/data.svm"

[model]
embed_dim = 4
mlp_widths = [8]

[stage1]
epochs = 1
grda = {{ lr = 0.3 }}

[stage2]
epochs = 1

[retrain]
epochs = 1

[output]
dir = "run"
{extra}"#
    )
}

fn setup(instances: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = aim(dir.path(), &["synth", "--out", "data", "--instances", instances, "--fields", "5", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn synth_is_reproducible() {
    let a = setup("300");
    let b = setup("300");
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join("data").join(f)).unwrap();
    assert_eq!(read(&a, "data.svm"), read(&b, "data.svm"));
    assert_eq!(read(&a, "manifest.json"), read(&b, "manifest.json"));
    let manifest: Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["planted"].as_array().unwrap().len(), 5);
}

#[test]
fn stages_run_separately_and_evaluate_reproduces_test_metrics() {
    let dir = setup("3000");
    std::fs::write(dir.path().join("run.toml"), config("")).unwrap();
    for stage in ["search-interactions", "search-embed", "retrain"] {
        let out = aim(dir.path(), &[stage, "--config", "run.toml"]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let run = dir.path().join("run");
    for file in ["stage1/report.json", "stage2/report.json", "artifact.json", "retrain/checkpoint.json"] {
        assert!(run.join(file).is_file(), "{file} missing");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(run.join("retrain/report.json")).unwrap()).unwrap();
    assert_eq!(report["param_count"], report["analytic_param_count"]);

    let out = aim(
        dir.path(),
        &["evaluate", "--checkpoint", "run/retrain/checkpoint.json", "--data", "data/data.svm", "--split", "test"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(eval["auc"], report["test"]["auc"]);
    assert_eq!(eval["logloss"], report["test"]["logloss"]);

    let metrics = std::fs::read_to_string(run.join("metrics.jsonl")).unwrap();
    let stages: Vec<String> = metrics
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["stage"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(stages.first().map(String::as_str), Some("search_interactions"));
    assert!(stages.iter().any(|s| s == "search_embed"));
    assert_eq!(stages.last().map(String::as_str), Some("retrain"));
}

#[test]
fn retrain_under_another_head() {
    let dir = setup("2000");
    std::fs::write(dir.path().join("run.toml"), config("")).unwrap();
    assert!(aim(dir.path(), &["pipeline", "--config", "run.toml"]).status.success());
    let out = aim(dir.path(), &["retrain", "--config", "run.toml", "--head", "ipnn"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["head"], "ipnn");
}

#[test]
fn stats_auc_lists_every_pair() {
    let dir = setup("2000");
    std::fs::write(dir.path().join("run.toml"), config("")).unwrap();
    let out = aim(dir.path(), &["stats-auc", "--config", "run.toml"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 10);
    let out = aim(dir.path(), &["stats-auc", "--config", "run.toml", "--tuple", "1,2", "--tuple", "2,3,4"]);
    let lines: Vec<Value> =
        String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["fields"], serde_json::json!([2, 3, 4]));
}

#[test]
fn user_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(aim(dir.path(), &["pipeline", "--config", "missing.toml"]).status.code(), Some(2));
    std::fs::write(dir.path().join("run.toml"), config("")).unwrap();
    let out = aim(dir.path(), &["pipeline", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    std::fs::write(dir.path().join("bad.toml"), config("[extra]\nkey = 1\n")).unwrap();
    assert_eq!(aim(dir.path(), &["pipeline", "--config", "bad.toml"]).status.code(), Some(2));
}

#[test]
fn collapsed_search_exits_3() {
    let dir = setup("1000");
    let text = config("").replace("[stage2]\nepochs = 1", "[stage2]\nepochs = 1\ngrda = { c = 1000.0 }");
    std::fs::write(dir.path().join("run.toml"), text).unwrap();
    let out = aim(dir.path(), &["pipeline", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("collapsed"));
}
