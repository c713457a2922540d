//! The `predism` binary end to end.

mod common;

use std::fs;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;

fn predism(args: &[&str]) -> Output {
    Command::new(predism_bin())
        .args(args)
        .env_remove("PREDISM_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn hazard_score_prints_level() {
    let o = predism(&["hazard-score", "--fatality", "15000"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "5");

    let o = predism(&["hazard-score", "--fatality", "15000", "--water-disruption", "5", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["overall"], 4);
    assert_eq!(v["per_attribute_levels"]["water_disruption"], 2);
}

#[test]
fn exit_codes() {
    assert_eq!(predism(&["--help"]).status.code(), Some(0));
    assert_eq!(predism(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(predism(&["sweep", "--scene", "x.png"]).status.code(), Some(1));
    assert_eq!(predism(&["hazard-score", "--fatality", "lots"]).status.code(), Some(1));

    let o = predism(&["hazard-score"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NoAttributes"));
    assert_eq!(predism(&["hazard-score", "--injury=-1"]).status.code(), Some(2));
    assert_eq!(predism(&["--tau", "1.5", "hazard-score", "--injury", "1"]).status.code(), Some(2));
    let o = predism(&["predict", "--scene", "/does/not/exist.png", "--labels", "/nope.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn sweep_writes_maps_renders_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write_scene(tmp.path(), "s", "flood", 12, 1, None);
    let out = tmp.path().join("d");
    let o = predism(&[
        "sweep",
        "--scene",
        f.png.to_str().unwrap(),
        "--labels",
        f.labels.to_str().unwrap(),
        "--type",
        "flood",
        "--levels",
        "3,4,5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "level-3.geojson",
            "level-3.png",
            "level-4.geojson",
            "level-4.png",
            "level-5.geojson",
            "level-5.png",
            "manifest.json"
        ]
    );
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["hazard_levels"], serde_json::json!([3, 4, 5]));
    assert_eq!(manifest["scene_id"], "s");
    let g: Value = serde_json::from_slice(&fs::read(out.join("level-4.geojson")).unwrap()).unwrap();
    assert_eq!(g["features"].as_array().unwrap().len(), 12);

    // Invalid levels are a data error and write nothing.
    let bad = tmp.path().join("bad");
    let o = predism(&[
        "sweep", "--scene", f.png.to_str().unwrap(), "--labels", f.labels.to_str().unwrap(),
        "--levels", "3,9", "--out", bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!bad.exists());
}

#[test]
fn predict_render_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write_scene(tmp.path(), "s", "flood", 8, 2, None);
    let (png, labels) = (f.png.to_str().unwrap(), f.labels.to_str().unwrap());

    let o = predism(&["predict", "--scene", png, "--labels", labels, "--hazard-level", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let map: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(map["entries"].as_array().unwrap().len(), 8);
    assert_eq!(map["hazard_level"], 2);
    assert_eq!(map["disaster_type"], "flood");

    let d = tmp.path().join("d");
    let o = predism(&["sweep", "--scene", png, "--labels", labels, "--levels", "2", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let map = d.join("level-2.geojson");
    let out_png = tmp.path().join("r.png");
    let o = predism(&[
        "render", "--scene", png, "--labels", labels, "--map", map.to_str().unwrap(), "--out", out_png.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&out_png).unwrap(), fs::read(d.join("level-2.png")).unwrap());

    let o = predism(&["evaluate", "--map", map.to_str().unwrap(), "--labels", labels]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["n"], 8);
}

#[test]
fn ingest_summarizes_events() {
    let tmp = tempfile::tempdir().unwrap();
    write_events(tmp.path(), Some(5));
    let o = predism(&["ingest", "--data", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let events = v.as_array().unwrap();
    let sum = |f: &dyn Fn(&Value) -> u64| events.iter().map(f).sum::<u64>();
    assert_eq!(sum(&|e| e["buildings"].as_u64().unwrap()), 120);
    // Every fifth building is unclassified.
    assert_eq!(sum(&|e| e["by_class"]["unclassified"].as_u64().unwrap_or(0)), 24);
}

#[test]
fn train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    write_events(tmp.path(), None);
    let run = |out: &str| {
        let out = tmp.path().join(out);
        let o = predism(&[
            "train", "--data", tmp.path().to_str().unwrap(), "--loss", "ordinal-ce", "--seed", "7", "--epochs", "3",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("history.json")).unwrap(), fs::read(out.join("model.json")).unwrap())
    };
    let (h1, m1) = run("a");
    let (h2, m2) = run("b");
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);
    let h: Value = serde_json::from_slice(&h1).unwrap();
    assert_eq!(h["flood"].as_array().unwrap().len(), 3);

    // The trained model loads back through --model.
    let f = write_scene(&tmp.path().join("x"), "s", "flood", 6, 3, None);
    let o = predism(&[
        "--model", tmp.path().join("a/model.json").to_str().unwrap(),
        "predict", "--scene", f.png.to_str().unwrap(), "--labels", f.labels.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config_file_and_env() {
    let tmp = tempfile::tempdir().unwrap();
    let f = write_scene(tmp.path(), "s", "flood", 4, 1, None);
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"tau": 0.99}"#).unwrap();
    let args = ["predict", "--scene", f.png.to_str().unwrap(), "--labels", f.labels.to_str().unwrap()];
    let levels = |o: Output| -> Vec<String> {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        v["entries"].as_array().unwrap().iter().map(|e| e["level"].to_string()).collect()
    };
    let via_env = levels(Command::new(predism_bin()).args(args).env("PREDISM_CONFIG", &cfg).output().unwrap());
    assert!(via_env.iter().all(|l| l == "\"unclassified\""));
    let flag = levels(
        Command::new(predism_bin())
            .args(["--tau", "0.01"])
            .args(args)
            .env("PREDISM_CONFIG", &cfg)
            .output()
            .unwrap(),
    );
    assert!(flag.iter().all(|l| l != "\"unclassified\""));
    let bad = Command::new(predism_bin()).args(args).env("PREDISM_CONFIG", tmp.path().join("missing.json")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
