use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_gazereader")).args(args).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "gazereader {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn corpus_to_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let data = dir.path().join("windows.jsonl");
    let cfg = dir.path().join("model.json");
    let ckpt = dir.path().join("ckpt");
    std::fs::write(&cfg, r#"{"n_p": 4, "n_k": 4, "dim": 8, "layers": 1, "heads": 1, "ffn_dim": 8, "epochs": 1, "lr_encoder": 0.001}"#).unwrap();

    run(&["synth", "--docs", "3", "--readers", "3", "--seed", "4", "--out", s(&corpus)]);
    run(&["align", "--corpus", s(&corpus), "--out", s(&data), "--config", s(&cfg), "--neg-ratio", "1"]);
    let lines = std::fs::read_to_string(&data).unwrap();
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["features"].is_array());

    let bare = dir.path().join("bare.jsonl");
    let stripped: String = lines
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("features");
            format!("{v}\n")
        })
        .collect();
    std::fs::write(&bare, stripped).unwrap();
    let freq = dir.path().join("windows.freq.json");
    run(&["features", s(&bare), "--freq-table", s(&freq), "--corpus", s(&corpus)]);
    assert_eq!(std::fs::read_to_string(&bare).unwrap(), lines);

    run(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&ckpt)]);
    assert!(ckpt.join("epoch-1.json").exists());

    let meta: Value = serde_json::from_str(std::fs::read_to_string(corpus.join("sessions.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    let trace = corpus.join("traces").join(format!("{}.jsonl", meta["session_id"].as_str().unwrap()));
    let doc = corpus.join("docs").join(format!("{}.json", meta["doc_id"].as_str().unwrap()));
    let scores: Vec<Value> = serde_json::from_str(&run(&["predict", "--ckpt", s(&ckpt.join("epoch-1.json")), "--session", s(&trace), "--doc", s(&doc), "--all"])).unwrap();
    assert!(!scores.is_empty());
    assert!(scores.iter().all(|w| (0.0..=1.0).contains(&w["score"].as_f64().unwrap())));

    let cond = dir.path().join("cond.jsonl");
    run(&["preprocess", s(&trace), s(&cond), "--window", "5", "--rate", "20"]);
    assert!(std::fs::read_to_string(&cond).unwrap().lines().count() > 2);

    let report: Value = serde_json::from_str(&run(&["eval", "--config", s(&cfg), "--data", s(&data), "--protocol", "cross-user", "--ablate", "gaze"])).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["ablation"], "gaze");
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_gazereader")).args(["eval", "--data", "x", "--protocol", "sideways"]).output().unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_gazereader")).args(["preprocess", "/nonexistent.jsonl", "/tmp/out.jsonl"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
