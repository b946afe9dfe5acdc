use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rulerank(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rulerank"));
    c.args(args).env_remove("RULERANK_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    rulerank(args).output().expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Temp dir holding `count` synthetic scenarios in `scen/`.
fn corpus(count: usize, extra: &[&str]) -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scen");
    let n = count.to_string();
    let mut args = vec!["synth", "--seed", "5", "--count", &n, "--out", s(&dir)];
    args.extend_from_slice(extra);
    let v = ok_json(run(&args));
    assert_eq!(v["written"].as_array().unwrap().len(), count);
    (tmp, dir)
}

#[test]
fn evaluate_reports_every_rule_and_candidate() {
    let (tmp, dir) = corpus(3, &[]);
    let out = tmp.path().join("ev.json");
    assert!(run(&["evaluate", "--scenarios", s(&dir), "--out", s(&out)]).status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["rules"].as_array().unwrap().len(), 28);
    let scen = v["scenarios"].as_array().unwrap();
    assert_eq!(scen.len(), 3);
    for e in scen {
        let ev = &e["evaluation"];
        assert_eq!(ev["tier_scores"].as_array().unwrap().len(), 6);
        assert_eq!(ev["violations"]["raw"][0].as_array().unwrap().len(), 28);
    }
}

#[test]
fn select_accepts_short_and_long_strategy_names() {
    let (_tmp, dir) = corpus(2, &[]);
    for (alias, name) in [("lex", "lexicographic"), ("scalar", "scalarized"), ("wsum", "weighted_sum"), ("conf", "confidence_only")] {
        let v = ok_json(run(&["select", "--scenarios", s(&dir), "--strategy", alias]));
        assert_eq!(v["strategy"], name);
        assert_eq!(v["scenarios"].as_array().unwrap().len(), 2);
    }
    let bad = run(&["select", "--scenarios", s(&dir), "--strategy", "best"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compare_with_stats_has_pairwise_tests() {
    let (_tmp, dir) = corpus(8, &[]);
    let v = ok_json(run(&["compare", "--scenarios", s(&dir), "--strategies", "lex,conf", "--stats"]));
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    for row in table {
        for col in ["safety", "legal", "road", "comfort", "s_plus_l", "total"] {
            assert!((0.0..=1.0).contains(&row[col].as_f64().unwrap()), "{col}");
        }
    }
    assert_eq!(v["pairwise"].as_array().unwrap().len(), 1);
}

#[test]
fn corrupted_sets_fool_confidence_only() {
    let (tmp, dir) = corpus(6, &[]);
    let bad = tmp.path().join("bad");
    let v = ok_json(run(&["corrupt", "--scenarios", s(&dir), "--family", "collision_prone", "--margin", "0.05", "--out", s(&bad)]));
    assert_eq!(v["written"].as_array().unwrap().len(), 6);
    let sel = ok_json(run(&["select", "--scenarios", s(&bad), "--strategy", "conf"]));
    for e in sel["scenarios"].as_array().unwrap() {
        assert_eq!(e["result"]["selected"], 6);
    }
}

#[test]
fn impossible_injections_are_skipped_not_fatal() {
    let (tmp, dir) = corpus(3, &["--template", "straight_follow"]);
    let v = ok_json(run(&["corrupt", "--scenarios", s(&dir), "--family", "signal_violating", "--out", s(&tmp.path().join("c"))]));
    assert_eq!(v["written"].as_array().unwrap().len(), 0);
    let skipped = v["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 3);
    assert!(skipped[0]["error"].as_str().unwrap().contains("injection not possible"));
}

#[test]
fn perturb_writes_each_repetition() {
    let (tmp, dir) = corpus(2, &[]);
    let out = tmp.path().join("p");
    let v = ok_json(run(&["perturb", "--scenarios", s(&dir), "--kind", "position", "--level", "1", "--out", s(&out)]));
    assert_eq!(v["written"].as_array().unwrap().len(), 20);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 20);
    assert_eq!(run(&["perturb", "--scenarios", s(&dir), "--kind", "heading", "--level", "3", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn verify_exit_code_reflects_result() {
    let out = run(&["verify", "--seed", "3", "--n", "300"]);
    let v = ok_json(out);
    assert_eq!(v["all_passed"], true);
    assert_eq!(v["properties"].as_array().unwrap().len(), 6);
}

#[test]
fn config_from_env_and_flag() {
    let (tmp, dir) = corpus(1, &[]);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, br#"{"scalarization_base": 100}"#).unwrap();
    let good = tmp.path().join("good.json");
    std::fs::write(&good, br#"{"epsilons": [0.01, 0.01, 0.01, 0.01], "scalarization_base": 101}"#).unwrap();

    let out = rulerank(&["select", "--scenarios", s(&dir), "--strategy", "scalar"]).env("RULERANK_CONFIG", &bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scalarization base 100"));

    // an explicit flag wins over the environment
    let out = rulerank(&["select", "--scenarios", s(&dir), "--strategy", "scalar", "--config", s(&good)])
        .env("RULERANK_CONFIG", &bad)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_mask_uses_labels_file() {
    let (tmp, dir) = corpus(1, &[]);
    let missing = run(&["select", "--scenarios", s(&dir), "--strategy", "lex", "--mask", "oracle"]);
    assert_eq!(missing.status.code(), Some(2));

    let id = std::fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
    let id = id.file_stem().unwrap().to_str().unwrap().to_string();
    let labels = tmp.path().join("labels.json");
    let body = serde_json::json!({ id: { "labels": vec![false; 28] } });
    std::fs::write(&labels, body.to_string()).unwrap();
    let v = ok_json(run(&["evaluate", "--scenarios", s(&dir), "--mask", "oracle", "--labels", s(&labels)]));
    let ev = &v["scenarios"][0]["evaluation"];
    // nothing applies, so nothing scores
    assert!(ev["tier_scores"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|x| x == 0.0));
}

#[test]
fn synth_is_byte_deterministic() {
    let (_a_tmp, a) = corpus(4, &[]);
    let (_b_tmp, b) = corpus(4, &[]);
    for e in std::fs::read_dir(&a).unwrap() {
        let p = e.unwrap().path();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(b.join(p.file_name().unwrap())).unwrap());
    }
}
