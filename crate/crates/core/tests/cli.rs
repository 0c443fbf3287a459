use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayes-lens"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn toy_inputs(dir: &Path) {
    fs::write(dir.join("loglik.csv"), "a,b\n0,0\n1,2\n2,4\n").unwrap();
    fs::write(dir.join("meta.json"), r#"{"chains": [1, 1, 1]}"#).unwrap();
}

fn totals(dir: &Path) -> Vec<(String, f64)> {
    let mut rdr = csv::Reader::from_path(dir.join("influence_totals.csv")).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].parse().unwrap())
        })
        .collect()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn toy_influence_footer() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&[
        "influence", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
        "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = totals(&out);
    assert_eq!(t[0], ("p_w".to_string(), 5.0));
    assert_eq!(t[2], ("p_v".to_string(), 18.0));
    assert!((t[3].1 - 3.6).abs() < 1e-15);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("influence_report.json")).unwrap()).unwrap();
    assert_eq!(report["conflict_flagged"], true);
}

#[test]
fn strict_mode_exits_two_on_conflict() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let args = |threshold: &str| {
        run(&[
            "influence", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
            "--out", p(tmp.path()), "--strict", "--threshold", threshold,
        ])
    };
    assert_eq!(args("3").status.code(), Some(2));
    assert_eq!(args("4").status.code(), Some(0));
}

#[test]
fn all_in_one_group_matches_global_ratio() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let o = run(&[
        "conflict", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
        "--groups", "all-in-one", "--out", p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("influence_report.json")).unwrap()).unwrap();
    assert_eq!(report["cross_conflict"][0]["ratio"], report["conflict_ratio"]["value"]);
    assert!(tmp.path().join("cross_conflict.csv").exists());
}

#[test]
fn group_file_and_factor_toggle() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    fs::write(tmp.path().join("groups.csv"), "obs_id,group\na,g1\nb,g2\n").unwrap();
    let o = run(&[
        "conflict", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
        "--groups", p(&tmp.path().join("groups.csv")), "--pv-group-factor", "false", "--out", p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("influence_report.json")).unwrap()).unwrap();
    assert_eq!(report["cross_conflict"][0]["ratio"], 1.0);
    assert_eq!(report["cross_conflict"][1]["ratio"], 1.0);
}

#[test]
fn conflict_requires_groups() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let o = run(&[
        "conflict", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
        "--out", p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_metadata_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let o = run(&[
        "influence", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("nope.json")),
        "--out", p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "MissingMetadata");
}

#[test]
fn chain_label_count_mismatch() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    fs::write(tmp.path().join("meta.json"), r#"{"chains": [1, 1]}"#).unwrap();
    let o = run(&[
        "influence", "--loglik", p(&tmp.path().join("loglik.csv")), "--meta", p(&tmp.path().join("meta.json")),
        "--out", p(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "ChainMismatch");
}

#[test]
fn oracle_on_intercept_only_spec() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, r#"{"X": [[1], [1], [1]], "y": [0, 0, 3], "sigma2": 1, "Psi": [[0]]}"#).unwrap();
    let o = run(&["oracle", "--spec", p(&spec), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    let d: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("linear_diagnostics.json")).unwrap()).unwrap();
    assert!((d["p_v"].as_f64().unwrap() - 1.0).abs() < 1e-13);
    assert!(tmp.path().join("linear_diagnostics.csv").exists());
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["simulate", "--draws", "600", "--chains", "3", "--seed", "99", "--n", "12", "--out", p(dir)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["spec.json", "loglik.csv", "meta.json", "pred.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulated_corpus_feeds_every_command() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = run(&[
        "simulate", "--draws", "2000", "--chains", "4", "--n", "20", "--plant-outlier", "3", "--plant-leverage", "7",
        "--out", p(d),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (ll, meta, pred) = (d.join("loglik.csv"), d.join("meta.json"), d.join("pred.csv"));
    let o = run(&["leverage", "--pred", p(&pred), "--meta", p(&meta), "--out", p(d)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "outliers", "--loglik", p(&ll), "--pred", p(&pred), "--meta", p(&meta), "--trunc-rank", "2", "--out", p(d),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let clout = fs::read_to_string(d.join("clout.csv")).unwrap();
    assert!(clout.starts_with("obs_id,clout,clout_trunc_2\n"));
    assert_eq!(clout.lines().count(), 21);
    assert_eq!(fs::read_to_string(d.join("scree.csv")).unwrap().lines().count(), 21);
    let dec: Value = serde_json::from_str(&fs::read_to_string(d.join("outlier_decomposition.json")).unwrap()).unwrap();
    let clout_json: Vec<f64> = dec["clout"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let top = clout_json.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(top, 3);
}

#[test]
fn csv_outputs_round_trip() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(run(&["simulate", "--draws", "400", "--chains", "2", "--n", "6", "--out", p(d)]).status.code(), Some(0));
    let o = run(&["influence", "--loglik", p(&d.join("loglik.csv")), "--meta", p(&d.join("meta.json")), "--out", p(d)]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("influence_report.json")).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(d.join("influence_report.csv")).unwrap();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.unwrap();
        let linf: f64 = rec[1].parse().unwrap();
        assert_eq!(linf, report["linf"][i]["value"].as_f64().unwrap());
        let clinf: f64 = rec[5].parse().unwrap();
        assert_eq!(clinf, report["clinf"][i]["value"].as_f64().unwrap());
    }
}

#[test]
fn zero_hat_value_names_the_observation() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("loglik.csv"), "a,b\n-1,-2\n-1.5,-1\n-0.5,-3\n-2,-1.2\n").unwrap();
    fs::write(d.join("pred.csv"), "a.mean,a.var,b.mean,b.var\n0,1,5,1\n1,1,5,1\n-1,1,5,1\n2,1,5,1\n").unwrap();
    fs::write(d.join("meta.json"), r#"{"chains": [0, 0, 1, 1], "families": "normal_known_var"}"#).unwrap();
    let o = run(&[
        "outliers", "--loglik", p(&d.join("loglik.csv")), "--pred", p(&d.join("pred.csv")),
        "--meta", p(&d.join("meta.json")), "--out", p(d),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "ZeroHatValue");
    assert!(err["message"].as_str().unwrap().contains('b'));
}

#[test]
fn thread_cap_is_validated() {
    let tmp = TempDir::new().unwrap();
    toy_inputs(tmp.path());
    let (ll, meta) = (tmp.path().join("loglik.csv"), tmp.path().join("meta.json"));
    let args = ["influence", "--loglik", p(&ll), "--meta", p(&meta), "--out", p(tmp.path())];
    let ok = bin().args(args).env("BAYES_LENS_THREADS", "1").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = bin().args(args).env("BAYES_LENS_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
