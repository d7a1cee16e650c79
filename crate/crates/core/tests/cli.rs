use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leolora::config::DEFAULT_SCENARIO_JSON;
use leolora::orbit;
use serde_json::Value;

fn leolora(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leolora"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// The bundled scenario with `edit` applied, written into `dir`.
fn scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(DEFAULT_SCENARIO_JSON).unwrap();
    v["sim"]["duration_days"] = 2.0.into();
    edit(&mut v);
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_metrics_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "short.json", |_| {});
    let out = tmp.path().join("run");
    let o = leolora(&["simulate", "--config", s(&cfg), "--seed", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));

    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("time,node_id,soc,fade_fraction"));
    assert!(lines.count() > 0);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["nodes"].as_array().unwrap().len(), 4);
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "short.json", |_| {});
    for dir in ["a", "b"] {
        let o = leolora(&["simulate", "--config", s(&cfg), "--seed", "7", "--out", s(&tmp.path().join(dir))]);
        assert_eq!(o.status.code(), Some(0));
    }
    for file in ["metrics.csv", "summary.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(file)).unwrap(),
            fs::read(tmp.path().join("b").join(file)).unwrap()
        );
    }
}

#[test]
fn sweep_runs_are_merged_in_seed_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "short.json", |v| v["sim"]["duration_days"] = 0.5.into());
    let out = tmp.path().join("sweep");
    let o = leolora(&[
        "simulate", "--config", s(&cfg), "--seed", "10", "--sweep", "3", "--format", "json", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let merged: Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = merged.as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, [10, 11, 12]);
    for i in 0..3 {
        assert!(out.join(format!("run-{i:03}")).join("metrics.json").exists());
    }
}

#[test]
fn missing_mandatory_field_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "bad.json", |v| {
        v["battery"].as_object_mut().unwrap().remove("alpha_sei");
    });
    let o = leolora(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("battery.alpha_sei"), "{}", text(&o.stderr));
}

#[test]
fn unreadable_config_is_a_validation_error() {
    let o = leolora(&["simulate", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "short.json", |v| v["sim"]["duration_days"] = 0.1.into());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = leolora(&["simulate", "--config", s(&cfg), "--out", s(&blocker)]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
}

#[test]
fn degradation_reaches_the_one_year_value() {
    let o = leolora(&["degradation", "--years", "1", "--resolution-days", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o.stdout);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for w in rows.windows(2) {
        assert!(w[1][2] >= w[0][2]);
    }
    let last = rows.last().unwrap();
    assert_eq!(last[0], 365.0);
    assert!((last[1] - 1.775336944932478e-4).abs() <= 1e-9 * 1.775336944932478e-4);
    assert!((last[2] - 1.389328902693365e-3).abs() <= 1e-9 * 1.389328902693365e-3);
}

#[test]
fn airtime_reports_the_default_packet() {
    let o = leolora(&["airtime", "--sf", "10", "--bw", "125000", "--payload", "10", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o.stdout);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let toa: f64 = row[7].parse().unwrap();
    let energy: f64 = row[8].parse().unwrap();
    assert!((toa - 0.288768).abs() < 1e-12, "{out}");
    assert!((energy - 0.1155072).abs() < 1e-12, "{out}");
    assert_eq!(leolora(&["airtime", "--payload", "0"]).status.code(), Some(2));
    assert_eq!(leolora(&["airtime", "--sf", "13"]).status.code(), Some(2));
}

#[test]
fn schedule_output_loads_back_as_an_override() {
    let tmp = tempfile::tempdir().unwrap();
    let sched = tmp.path().join("windows.json");
    let o = leolora(&["schedule", "--horizon-s", "86400", "--out", s(&sched)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));

    let doc: Value = serde_json::from_str(&fs::read_to_string(&sched).unwrap()).unwrap();
    assert_eq!(doc["nodes"][0]["sun_fraction"].as_f64().unwrap(), 55.0 / 90.0);
    let parsed = orbit::parse_schedule_records(&fs::read_to_string(&sched).unwrap()).unwrap();
    assert_eq!(parsed.len(), 4);
    let total: usize = parsed.values().map(|s| s.len()).sum();
    assert_eq!(total, doc["windows"].as_array().unwrap().len());

    let cfg = scenario(tmp.path(), "override.json", |v| {
        v["sim"]["duration_days"] = 1.0.into();
        v["sim"]["schedule_override"] = "windows.json".into();
    });
    let o = leolora(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
}

#[test]
fn unknown_keys_warn_but_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario(tmp.path(), "extra.json", |v| {
        v["sim"]["duration_days"] = 0.1.into();
        v["radio"]["spreading_factr"] = 9.into();
    });
    let o = leolora(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stderr).contains("radio.spreading_factr"), "{}", text(&o.stderr));
}
