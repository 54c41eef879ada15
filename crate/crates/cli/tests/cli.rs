use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 5

[paths]
output = "out"

[split]
train_months = { from = "2018-01", to = "2018-09" }
test_months = ["2018-10", "2018-11", "2018-12"]

[models.forest]
n_trees = 8
max_depth = 6

[models.boosted]
rounds = 20

[ablation]
k = 3

[synth]
rows = 8
cols = 8
n_venues = 150
"#;

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn riskflow(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskflow")).args(args).arg("--config").arg(config).output().unwrap()
}

fn ok(config: &Path, args: &[&str]) -> String {
    let out = riskflow(config, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// The error line a failing run prints on stderr.
fn error_line(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
    }
    files
}

#[test]
fn evaluate_without_features_reports_missing_artifact() {
    let (_dir, cfg) = setup(SMALL);
    let out = riskflow(&cfg, &["evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "missing_artifact");
    assert!(err["message"].as_str().unwrap().starts_with("missing features artifact"));
}

#[test]
fn config_and_usage_errors_are_single_json_lines() {
    let (_dir, cfg) = setup("seed = \"zero\"\n");
    let err = error_line(&riskflow(&cfg, &["synth"]));
    assert_eq!(err["error"], "config");

    let (_dir, cfg) = setup(SMALL);
    let out = riskflow(&cfg, &["forecast"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let out = riskflow(Path::new("/nonexistent/run.toml"), &["synth"]);
    assert_eq!(error_line(&out)["error"], "io");

    let (_dir, cfg) = setup("[split]\ntrain_months = [\"2018-01\"]\ntest_months = [\"2018-01\"]\n");
    ok(&cfg, &["synth"]);
    assert_eq!(error_line(&riskflow(&cfg, &["features"]))["error"], "config");
}

#[test]
fn full_pipeline_is_idempotent_and_reports() {
    let (dir, cfg) = setup(SMALL);
    let out_dir = dir.path().join("out");
    let commands = ["synth", "ingest", "features", "train", "evaluate", "ablate", "report"];
    for c in commands {
        ok(&cfg, &[c]);
    }
    let first = snapshot(&out_dir);
    for name in [
        "venues.csv",
        "movements.csv",
        "crimes.csv",
        "cell_counts.csv",
        "od_counts.csv",
        "features.csv",
        "risk_table.csv",
        "models.json.gz",
        "train_log.csv",
        "mae_rmse.csv",
        "ablation.csv",
        "report.md",
        "mae.svg",
        "rmse.svg",
        "pvalues.csv",
        "manifest.json",
    ] {
        assert!(first.contains_key(name), "missing {name}");
    }

    let eval = String::from_utf8(first["mae_rmse.csv"].clone()).unwrap();
    assert_eq!(eval.lines().count(), 1 + 30);
    let ablation = String::from_utf8(first["ablation.csv"].clone()).unwrap();
    assert_eq!(ablation.lines().count(), 1 + 25);
    let grid = String::from_utf8(first["pvalues.csv"].clone()).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "interval,Historical,Movement,Neighbourhood,POI,DIFFER");
    assert_eq!(grid.lines().count(), 6);

    for svg in ["mae.svg", "rmse.svg"] {
        let text = String::from_utf8(first[svg].clone()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(doc.descendants().filter(|n| n.has_tag_name("rect")).count() >= 30);
    }

    let manifest: Value = serde_json::from_slice(&first["manifest.json"]).unwrap();
    for c in commands {
        let run = &manifest["runs"][c];
        assert_eq!(run["seed"], 5);
        assert_eq!(run["config_sha256"].as_str().unwrap().len(), 64);
    }
    let outputs = manifest["runs"]["evaluate"]["outputs"].as_object().unwrap();
    assert!(outputs.contains_key("mae_rmse.csv"));
    assert_eq!(manifest["runs"]["evaluate"]["inputs"].as_object().unwrap().len(), 1);

    for c in commands {
        ok(&cfg, &[c]);
    }
    let second = snapshot(&out_dir);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} changed on rerun");
    }
}

#[test]
fn seed_flag_changes_outputs_and_is_recorded() {
    let (dir, cfg) = setup(SMALL);
    ok(&cfg, &["synth"]);
    let a = fs::read(dir.path().join("out/crimes.csv")).unwrap();
    ok(&cfg, &["synth", "--seed", "6", "--out", "other"]);
    let b = fs::read(dir.path().join("other/crimes.csv")).unwrap();
    assert_ne!(a, b);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("other/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"]["synth"]["seed"], 6);
}

#[test]
fn report_without_ablation_omits_the_grid() {
    let (dir, cfg) = setup(SMALL);
    for c in ["synth", "features", "evaluate"] {
        ok(&cfg, &[c]);
    }
    let stdout = ok(&cfg, &["report"]);
    assert!(stdout.contains("warning: no ablation artifact"));
    let out = dir.path().join("out");
    assert!(out.join("report.md").is_file());
    assert!(out.join("mae.svg").is_file());
    assert!(out.join("rmse.svg").is_file());
    assert!(!out.join("pvalues.csv").exists());
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("p-value grid is omitted"));
}

#[test]
fn report_on_empty_evaluation_is_missing_artifact() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    let err = error_line(&riskflow(&cfg, &["report"]));
    assert_eq!(err["error"], "missing_artifact");
    fs::write(out.join("mae_rmse.csv"), "interval,model,setting,n_train,n_test,mae,rmse\n").unwrap();
    let err = error_line(&riskflow(&cfg, &["report"]));
    assert_eq!(err["error"], "missing_artifact");
    assert!(err["message"].as_str().unwrap().contains("mae_rmse.csv"));
}

#[test]
fn rejects_flag_writes_line_numbered_rejects() {
    let (dir, cfg) = setup(SMALL);
    ok(&cfg, &["synth"]);
    let crimes = dir.path().join("out/crimes.csv");
    let mut text = fs::read_to_string(&crimes).unwrap();
    let clean_rows = text.lines().count() - 1;
    text.push_str("not-a-date,41.81,-87.74,THEFT\n2018-03-01T10:00:00,95.0,-87.74,THEFT\n");
    fs::write(&crimes, text).unwrap();

    let stdout = ok(&cfg, &["ingest", "--rejects"]);
    assert!(stdout.contains(&format!("crimes: {} rows, {} accepted, 2 rejected", clean_rows + 2, clean_rows)));
    let rejects = fs::read_to_string(dir.path().join("out/crimes.rejects.csv")).unwrap();
    let lines: Vec<&str> = rejects.lines().collect();
    assert_eq!(lines[0], "line_no,reason");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with(&format!("{},", clean_rows + 2)));
    assert!(lines[2].starts_with(&format!("{},", clean_rows + 3)));
    let venue_rejects = fs::read_to_string(dir.path().join("out/venues.rejects.csv")).unwrap();
    assert_eq!(venue_rejects.lines().count(), 1);
}
