use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ergodyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_chain(dir: &Path) -> String {
    let path = dir.join("q.txt");
    fs::write(&path, "# three states\n-1 0.6 0.4\n0.5 -1 0.5\n0.2 0.8 -1\n").unwrap();
    path.to_str().unwrap().to_string()
}

fn custom_config(dir: &Path) -> String {
    write_chain(dir);
    let path = dir.join("custom.toml");
    fs::write(
        &path,
        "scenario = \"custom\"\nseed = 9\n[model.chain]\nfile = \"q.txt\"\n[budgets]\nhitting_paths = 50\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn custom_scenario_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = custom_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = ergodyn(&["scenario", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["scenario"], "custom");
    assert!(report["runtime"]["seconds"].is_number());
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved["claims"], report["claims"]);
    for claim in report["claims"].as_array().unwrap() {
        assert!(!claim["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn reports_match_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = custom_config(dir.path());
    let mut a = stdout_json(&ergodyn(&["scenario", "--config", &cfg, "--threads", "1"]));
    let mut b = stdout_json(&ergodyn(&["scenario", "--config", &cfg, "--threads", "3"]));
    a.as_object_mut().unwrap().remove("runtime");
    b.as_object_mut().unwrap().remove("runtime");
    assert_eq!(a, b);
}

#[test]
fn failing_claim_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    // A perfect fit is never observed from Monte Carlo decay curves.
    fs::write(
        &cfg,
        "scenario = \"diffusion\"\nseed = 5\n[thresholds]\nr_squared = 1.0\n",
    )
    .unwrap();
    let out = ergodyn(&[
        "scenario",
        "--config",
        cfg.to_str().unwrap(),
        "--budget-scale",
        "0.02",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("claim,verdict,evidence_only,key,value\n"));
    assert!(text.contains("coupling_decay,fail"));
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scenario = \"oracle\"\nseed = 1\n[budgets]\nn_path = 10\n").unwrap();
    assert_eq!(code(&ergodyn(&["scenario", "--config", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&ergodyn(&["oracle"])), 3, "seed is mandatory");
    assert_eq!(
        code(&ergodyn(&["scenario", "--seed", "1", "--budget-scale", "-1", "oracle"])),
        3
    );
    assert_eq!(code(&ergodyn(&["frobnicate"])), 3);
    let chain = write_chain(dir.path());
    assert_eq!(
        code(&ergodyn(&["simulate", "--chain", &chain, "--x0", "5", "--seed", "1"])),
        3
    );
    assert_eq!(
        code(&ergodyn(&["simulate", "--x0", "0", "--seed", "1"])),
        3,
        "no model given"
    );
}

#[test]
fn reducible_chain_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    fs::write(&path, "-1 1 0 0\n1 -1 0 0\n0 0 -1 1\n0 0 1 -1\n").unwrap();
    let out = ergodyn(&["spectral", "--chain", path.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reducible"));
}

#[test]
fn spectral_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.txt");
    fs::write(&path, "-1 1\n2 -2\n").unwrap();
    let out = ergodyn(&["spectral", "--chain", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["spectrum"]["spectral_gap"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(v["hitting_moment_bound"]["violations"].as_array().unwrap().len(), 0);

    let csv = ergodyn(&["spectral", "--chain", path.to_str().unwrap(), "--format", "csv"]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("re,im\n"));
}

#[test]
fn simulate_is_reproducible_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--model",
        "pdmp",
        "--x0",
        "0.5",
        "--horizon",
        "5",
        "--seed",
        "3",
        "--format",
        "csv",
    ];
    let a = ergodyn(&args);
    let b = ergodyn(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("time,state\n0,0.5\n"));
    assert!(text.trim_end().lines().last().unwrap().starts_with("5,"));

    let out = dir.path().join("sim");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    assert_eq!(code(&ergodyn(&with_out)), 0);
    assert_eq!(fs::read_to_string(out.join("simulate.csv")).unwrap(), text);
}

#[test]
fn gluing_and_switching_couplings() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write_chain(dir.path());
    let g = stdout_json(&ergodyn(&[
        "couple",
        "--chain",
        &chain,
        "--x1",
        "0",
        "--x2",
        "2",
        "--kind",
        "gluing",
        "--horizon",
        "50",
        "--seed",
        "1",
    ]));
    assert_eq!(g["endpoints_equal"], true, "laws at a long horizon are nearly equal");
    let s = stdout_json(&ergodyn(&[
        "couple",
        "--model",
        "ou",
        "--x1",
        "-2",
        "--x2",
        "2",
        "--horizon",
        "30",
        "--seed",
        "1",
    ]));
    assert!(s["coupled_at"].as_f64().unwrap() <= 30.0);
}

#[test]
fn estimators_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let chain = write_chain(dir.path());
    let h = stdout_json(&ergodyn(&[
        "estimate", "hitting", "--chain", &chain, "--x0", "2", "--lo", "0", "--hi", "0", "--alpha", "0.1", "--paths",
        "500", "--seed", "2",
    ]));
    assert!(h["estimate"]["value"].as_f64().unwrap() > 1.0);

    let d = stdout_json(&ergodyn(&[
        "estimate", "distance", "--chain", &chain, "--x1", "1", "--x2", "1", "--t", "1", "--seed", "2",
    ]));
    assert!(d["estimate"]["value"].as_f64().unwrap().abs() < 0.05);

    let k = ergodyn(&[
        "estimate", "doeblin", "--model", "ou", "--starts", "-1,1", "--t", "1", "--edges", "-4", "4", "40", "--seed",
        "2", "--format", "csv",
    ]);
    assert_eq!(code(&k), 0);
    let text = String::from_utf8(k.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    // ½‖N(e⁻¹, 1 − e⁻²) − N(−e⁻¹, 1 − e⁻²)‖ = 2Φ(e⁻¹/√(1 − e⁻²)) − 1
    let kappa: f64 = row[1].parse().unwrap();
    let se: f64 = row[2].parse().unwrap();
    assert!((kappa - 0.3076).abs() < 3.0 * se + 0.01, "{kappa} ± {se}");
}
