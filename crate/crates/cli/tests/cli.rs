use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlrules(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlrules")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mlrules(args);
    assert!(
        out.status.success(),
        "mlrules {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = mlrules(args);
    assert!(!out.status.success(), "mlrules {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn synth_train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--scenario", "conditional-dependence", "--examples", "400", "--num-labels", "3", "--seed", "4", "--out-dir", p(&data)]);
    let train = data.join("train.arff");
    let test = data.join("test.arff");
    assert!(fs::read_to_string(&train).unwrap().starts_with("@relation"));
    let boundaries: serde_json::Value = serde_json::from_str(&fs::read_to_string(data.join("boundaries.json")).unwrap()).unwrap();
    assert_eq!(boundaries["angles"].as_array().unwrap().len(), 3);

    let model = dir.path().join("model.json");
    ok(&["train", p(&train), "--labels", "3", "--model", p(&model), "--loss", "ew", "--head", "multi", "--rules", "60", "--l2", "0.5", "--seed", "2"]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["rules"].as_array().unwrap().len(), 60);

    let predictions = dir.path().join("pred.csv");
    ok(&["predict", p(&test), "--model", p(&model), "--output", p(&predictions)]);
    let text = fs::read_to_string(&predictions).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "y1,y2,y3");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| r.split(',').all(|v| v == "0" || v == "1")));
    assert_eq!(ok(&["predict", p(&test), "--model", p(&model)]), text);

    let report = key_values(&ok(&["evaluate", p(&test), "--model", p(&model)]));
    let keys: Vec<&str> = report.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(keys, ["examples", "hamming_loss", "subset_zero_one_loss", "example_f1"]);
    let subset: f64 = report[2].1.parse().unwrap();
    assert!(subset < 0.5, "subset 0/1 loss {subset}");

    let json: serde_json::Value = serde_json::from_str(&ok(&["evaluate", p(&test), "--model", p(&model), "--json"])).unwrap();
    assert_eq!(json["subset_zero_one_loss"].as_f64().unwrap(), subset);
    assert_eq!(json["examples"].as_u64().unwrap(), 400);

    let first = key_values(&ok(&["evaluate", p(&test), "--model", p(&model), "--rules", "1", "--decode", "sign"]));
    assert_ne!(first[2].1, report[2].1);
}

#[test]
fn tune_selects_and_saves_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--examples", "300", "--num-labels", "2", "--out-dir", p(&data)]);
    let report = dir.path().join("grid.tsv");
    let model = dir.path().join("best.json");
    let best = ok(&[
        "tune", p(&data.join("train.arff")), "--labels", "2", "--loss", "lw", "--head", "multi",
        "--shrinkage-grid", "0.3,0.5", "--l2-grid", "1", "--rules-grid", "1,20",
        "--metric", "hamming", "--jobs", "2", "--report", p(&report), "--model", p(&model),
    ]);
    let best: serde_json::Value = serde_json::from_str(&best).unwrap();
    assert_eq!(best["l2"].as_f64().unwrap(), 1.0);
    let rules = best["rules"].as_u64().unwrap();
    let table = fs::read_to_string(&report).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);
    assert!(table.starts_with("shrinkage\tl2\trules\thamming\tsubset01"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["rules"].as_array().unwrap().len() as u64, rules);
}

#[test]
fn trajectory_writes_one_block_per_variant() {
    let out = ok(&["trajectory", "--examples", "300", "--variants", "lw-single,ew-multi", "--checkpoints", "1,5,10"]);
    let blocks: Vec<&str> = out.split("\n\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[0].starts_with("# lw-single\nrules\thamming\tsubset01\n"));
    assert!(blocks[1].starts_with("# ew-multi\n"));
    let last: Vec<&str> = blocks[1].trim_end().lines().last().unwrap().split('\t').collect();
    assert_eq!(last[0], "10");

    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--examples", "200", "--num-labels", "2", "--out-dir", p(dir.path())]);
    let from_files = ok(&[
        "trajectory", "--train", p(&dir.path().join("train.arff")), "--test", p(&dir.path().join("test.arff")),
        "--labels", "2", "--variants", "lw-multi", "--checkpoints", "2,4",
    ]);
    assert_eq!(from_files.lines().count(), 4);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.arff");
    let model = dir.path().join("m.json");
    assert!(fails(&["train", p(&missing), "--labels", "2", "--model", p(&model)]).contains("error:"));

    let bad = dir.path().join("bad.arff");
    fs::write(&bad, "@relation r\n@attribute x numeric\n@attribute y {0,1}\n@data\n1,0\nnope,1\n").unwrap();
    let message = fails(&["train", p(&bad), "--labels", "1", "--model", p(&model)]);
    assert!(message.contains("line 6"), "{message}");

    fails(&["train", p(&bad), "--labels", "1", "--model", p(&model), "--loss", "squared"]);
    fails(&["train", p(&bad), "--labels", "1", "--model", p(&model), "--shrinkage", "0"]);

    ok(&["synth", "--examples", "50", "--num-labels", "2", "--out-dir", p(dir.path())]);
    ok(&["train", p(&dir.path().join("train.arff")), "--labels", "2", "--model", p(&model), "--rules", "5"]);
    let message = fails(&["evaluate", p(&bad), "--model", p(&model), "--labels", "1"]);
    assert!(message.starts_with("error:"), "{message}");
    fails(&["evaluate", p(&dir.path().join("test.arff")), "--model", p(&model), "--rules", "99"]);
    fails(&["synth", "--noise", "1.5", "--out-dir", p(dir.path())]);
    fails(&["tune", p(&dir.path().join("train.arff")), "--labels", "2", "--rules-grid", ""]);
}
