use std::path::Path;
use std::process::Command;

use mpl_cli::problem::write_problem;
use mpl_cli::{exit, parse_problem, run_scenario, ProblemFile, RunConfig, Scenario};

fn mpl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mpl")).args(args).env_remove("MPL_SEED").output().unwrap()
}

fn csv_header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn emitted_problem_parses_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qtp.json");
    write_problem(&path, &ProblemFile::qtp()).unwrap();
    assert_eq!(parse_problem(&path).unwrap(), ProblemFile::qtp());
}

#[test]
fn missing_weight_is_a_hard_error_with_a_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = ProblemFile::qtp().to_json();
    v["cost"].as_object_mut().unwrap().remove("q");
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = mpl(&["attack", "--problem", path.to_str().unwrap(), "--scenario", "hf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::HARD_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/cost/q"));
}

#[test]
fn unmet_precondition_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mpl(&[
        "attack", "--problem", "qtp", "--scenario", "dense-multi", "--horizons", "5", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::HARD_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    assert!(!out_dir.exists());
}

#[test]
fn attack_writes_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpl(&[
        "attack", "--problem", "qtp", "--scenario", "hf", "--horizons", "10,30,50", "--seed", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_header(&dir.path().join("metrics.csv")), "horizon,eps_a,eps_b,eps_y,rms");
    assert_eq!(csv_header(&dir.path().join("zeros.csv")), "horizon,index,re,im");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "hf");
    assert_eq!(report["records"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mpl"))
        .args(["attack", "--problem", "qtp", "--scenario", "key-recovery", "--horizons", "5", "--out"])
        .arg(dir.path())
        .env("MPL_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
}

#[test]
fn attack_failure_sets_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = ProblemFile::qtp().to_json();
    // A shift register: A is singular, so the read-off through A⁻¹ fails.
    v["system"]["a"] = serde_json::json!([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0]]);
    v["system"]["discrete"] = serde_json::json!(true);
    let path = dir.path().join("shift.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = mpl(&[
        "attack", "--problem", path.to_str().unwrap(), "--scenario", "dense-full", "--horizons", "6", "--seed", "0",
        "--out", dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(exit::ATTACK_FAILED), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn build_dense_writes_one_file_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpl(&["build-dense", "--problem", "qtp", "--horizons", "3,4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dense_n4.json")).unwrap()).unwrap();
    assert_eq!(doc["h"].as_array().unwrap().len(), 8);
    assert!(dir.path().join("dense_n3.json").exists());
}

#[test]
fn identity_key_leaves_nothing_to_estimate() {
    let mut cfg = RunConfig::new(0, vec![5]);
    cfg.identity_key = true;
    let res = run_scenario(&ProblemFile::qtp(), Scenario::Separate, &cfg, None).unwrap();
    assert_eq!(res.records[0].eps_a, Some(0.0));
    assert_eq!(res.records[0].metrics["q_error"], 0.0);
}

#[test]
fn hf_error_shrinks_with_the_horizon() {
    let cfg = RunConfig::new(0, vec![10, 20, 30, 40, 50]);
    let res = run_scenario(&ProblemFile::qtp(), Scenario::Hf, &cfg, None).unwrap();
    let eps: Vec<f64> = res.records.iter().map(|r| r.eps_a.unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
}

#[test]
fn key_recovery_is_exact() {
    for seed in 0..5 {
        let res = run_scenario(&ProblemFile::qtp(), Scenario::KeyRecovery, &RunConfig::new(seed, vec![5]), None).unwrap();
        let m = &res.records[0].metrics;
        assert!(m["r_mat_error"] < 1e-12, "{m:?}");
        assert!(m["r_vec_error"] < 1e-12, "{m:?}");
        assert!(m["round_trip_error"] < 1e-6, "{m:?}");
    }
}

#[test]
fn scenario_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let problem = ProblemFile::qtp();
    let cfg = RunConfig::new(9, vec![9, 12]);
    for sc in [Scenario::Affine, Scenario::DenseMulti, Scenario::StructuredNoise] {
        run_scenario(&problem, sc, &cfg, Some(a.path())).unwrap();
        run_scenario(&problem, sc, &cfg, Some(b.path())).unwrap();
        for f in ["metrics.csv", "eigenvalues.csv", "zeros.csv", "report.json"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{sc} {f}");
        }
    }
}

#[test]
fn every_scenario_runs_on_the_fixture() {
    let problem = ProblemFile::qtp();
    for sc in Scenario::ALL {
        let res = run_scenario(&problem, sc, &RunConfig::new(1, vec![9]), None).unwrap();
        assert_eq!(res.records.len(), 1, "{sc}");
        assert_eq!(res.scenario, sc.name());
    }
}
