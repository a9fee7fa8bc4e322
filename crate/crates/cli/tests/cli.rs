use std::path::Path;
use std::process::{Command, Output};

use relentropy_core::solver::read_bin;
use serde_json::Value;
use tempfile::TempDir;

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relentropy-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("RELENT_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_hypotheses_on_gas_defaults_passes() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["check-hypotheses", "--model", "ideal-gas", "--out", "report.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("report.json"));
    let entries = report["entries"].as_array().unwrap();
    assert!(entries.len() >= 4);
    assert!(entries.iter().all(|e| e["status"] == "pass"));
    let meta = json(&dir.path().join("report.json.meta.json"));
    assert_eq!(meta["subcommand"], "check-hypotheses");
    assert!(meta["versions"]["relentropy-core"].is_string());
    assert!(meta["runtime_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn model_flag_must_agree_with_config() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.json", r#"{"model": {"name": "linear-advection"}}"#);
    let o = lab(&["check-hypotheses", "--model", "ideal-gas", "--config", &c, "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.name"));
    let o = lab(&["check-hypotheses", "--model", "linear-advection", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(lab(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn schema_violations_name_the_key() {
    let dir = TempDir::new().unwrap();
    let neg = write(&dir, "neg.json", r#"{"grid": {"N": -16}}"#);
    let o = lab(&["simulate", "--config", &neg, "--out", "t.bin"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.N"), "{}", stderr(&o));

    let unknown = write(&dir, "u.json", r#"{"study": {"eps_list": [0.1], "epsilon": 2}}"#);
    let o = lab(&["converge-eps", "--config", &unknown, "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("study.epsilon"), "{}", stderr(&o));

    let wrong = write(&dir, "w.json", r#"{"subcommand": "stability"}"#);
    let o = lab(&["converge-eps", "--config", &wrong, "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eps_with_transport_sweep_is_ambiguous() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.json", r#"{"solver": {"eps": 0.01}, "study": {"mu0": [0.01, 0.001], "k0": [0.01, 0.001]}}"#);
    let o = lab(&["adiabatic-limit", "--config", &c, "--out", "a.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ambiguous viscosity"), "{}", stderr(&o));
}

#[test]
fn missing_output_path_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["simulate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("output.path"));
}

#[test]
fn simulate_writes_binary_and_csv() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.json", r#"{"grid": {"N": 32}, "solver": {"eps": 0.01, "t_final": 0.05}}"#);
    let o = lab(&["simulate", "--config", &c, "--out", "t.bin", "--csv", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traj = read_bin(&dir.path().join("t.bin")).unwrap();
    assert_eq!(traj.grid.cells(), 32);
    assert!((traj.final_field().time - 0.05).abs() < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,u,v,theta"));
    assert_eq!(csv.lines().count(), 1 + 32 * traj.len());

    // Defaults are echoed in the sidecar.
    let meta = json(&dir.path().join("t.bin.meta.json"));
    assert_eq!(meta["resolved"]["solver"]["cfl_hyp"], 0.4);
    assert_eq!(meta["resolved"]["solver"]["cfl_par"], 0.4);
    assert!(meta["result"]["conservation_drift"][0].as_f64().unwrap() < 1e-12);
}

#[test]
fn relent_breakdown_from_default_case_and_files() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["relent", "--out", "b.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("t,x,eta_rel,q_rel_flux,D,J_flux,Q1,Q2,Q3,Q4,Q5,Q6,hyp_term,residual")
    );

    let sim = write(&dir, "s.json", r#"{"grid": {"N": 32}, "solver": {"eps": 0.01, "t_final": 0.05}}"#);
    assert_eq!(lab(&["simulate", "--config", &sim, "--out", "a.bin"], dir.path()).status.code(), Some(0));
    let flat = write(
        &dir,
        "f.json",
        r#"{"grid": {"N": 32}, "solver": {"eps": 0.0, "t_final": 0.05},
            "study": {"init": {"kind": "constant", "state": [1.0, 0.0, 1.0]}}}"#,
    );
    assert_eq!(lab(&["simulate", "--config", &flat, "--out", "b.bin"], dir.path()).status.code(), Some(0));
    let case = write(&dir, "case.json", r#"{"study": {"case": {"trajectory": {"file": "a.bin"}, "reference": {"file": "b.bin"}}}}"#);
    let o = lab(&["relent", "--case", &case, "--out", "fb.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let meta = json(&dir.path().join("fb.csv.meta.json"));
    assert_eq!(meta["result"]["eps"], 0.01);
}

#[test]
fn converge_eps_outside_band_exits_one_with_slope() {
    let dir = TempDir::new().unwrap();
    let c = write(
        &dir,
        "c.json",
        r#"{"grid": {"N": 32}, "solver": {"t_final": 0.05},
            "study": {"eps_list": [0.1, 0.01, 0.001], "band": [5.0, 6.0]}}"#,
    );
    let o = lab(&["converge-eps", "--config", &c, "--out", "c.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("check slope ="), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("parameter,metric,final_relent,l2_final,steps"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn stability_study_passes_at_small_scale() {
    let dir = TempDir::new().unwrap();
    let c = write(
        &dir,
        "c.json",
        r#"{"grid": {"N": 32}, "solver": {"t_final": 0.05}, "study": {"eps_list": [0.1, 0.01]}}"#,
    );
    let o = lab(&["stability", "--config", &c, "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("parameter,metric,eps,sup_amplification,initial_l2"));
}

#[test]
fn young_check_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let c = write(
        &dir,
        "y.json",
        r#"{"grid": {"N": 16}, "solver": {"t_final": 0.05}, "study": {"measures": {"count": 50, "cells": 2}}, "seed": 9}"#,
    );
    let a = lab(&["young-check", "--config", &c, "--out", "a.csv"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = lab(&["young-check", "--config", &c, "--out", "b.csv"], dir.path());
    assert_eq!(b.status.code(), Some(0));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv.gronwall.csv"), read("b.csv.gronwall.csv"));
    let text = String::from_utf8(read("a.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("sample,cell,H,H_direct,Z_norm,Z_direct_norm,jensen_gap"));
    assert_eq!(text.lines().count(), 1 + 100);

    let other = lab(&["young-check", "--config", &c, "--out", "c.csv", "--seed", "10"], dir.path());
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn young_check_reads_measures_from_file() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "m.json",
        r#"[[[{"w": 0.5, "state": [1.1, 0.0, 1.0]}, {"w": 0.5, "state": [0.9, 0.0, 1.0]}]],
            [[{"w": 1.0, "state": [1.0, 0.0, 1.0]}]]]"#,
    );
    let c = write(
        &dir,
        "y.json",
        r#"{"grid": {"N": 16}, "solver": {"t_final": 0.05}, "study": {"measures": {"file": "m.json"}}}"#,
    );
    let o = lab(&["young-check", "--config", &c, "--out", "y.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    // The Dirac mass at the reference carries no relative entropy.
    assert!(rows[1].starts_with("1,0,0.0000000000000000e0,"));

    write(&dir, "bad.json", r#"[[[{"w": 0.4, "state": [1.0, 0.0, 1.0]}]]]"#);
    let c = write(&dir, "b.json", r#"{"study": {"measures": {"file": "bad.json"}}}"#);
    assert_eq!(lab(&["young-check", "--config", &c, "--out", "y.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_relentropy-lab"))
            .args(["check-hypotheses", "--out", "r.json"])
            .current_dir(dir.path())
            .env("RELENT_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(2));
    let ok = run("1");
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("r.json.meta.json"))["threads"], 1);
}
