mod common;

use common::*;
use serde_json::json;

#[test]
fn default_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = depsched(&["validate", "--report", "report.json"], dir.path());
    assert_eq!(r.code, 0, "{}\n{}", r.stdout, r.stderr);
    assert!(!r.stdout.contains("FAIL"));
    assert!(r.stdout.contains("candidates_evaluated"));
    assert!(r.stdout.contains("solve_time_ms"));
    let v = read_json(&dir.path().join("report.json"));
    assert_eq!(v["instances"].as_array().unwrap().len(), 20);
    assert!(v["candidates_evaluated"].as_u64().unwrap() > 0);
    assert!(v["properties"].as_array().unwrap().iter().all(|p| p["pass"] == true));
}

#[test]
fn single_instance_passes() {
    let (dir, _, _) = setup();
    let r = depsched(
        &[
            "validate",
            "--config",
            "instance.json",
            "--models",
            "models.json",
            "--report",
            "r.json",
            "--timing",
        ],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}\n{}", r.stdout, r.stderr);
    let v = read_json(&dir.path().join("r.json"));
    assert!(v["solve_time_ms"].as_f64().unwrap() >= 0.0);
    for name in [
        "closed form matches event simulation",
        "schedule constraints hold",
        "solver within 1% of brute force",
    ] {
        assert!(r.stdout.contains(name), "{name}");
    }
}

#[test]
fn negative_beta_names_the_invariant() {
    let (dir, _, _) = setup();
    let (_, mut lm) = comm_bound();
    lm["t_e"]["beta"] = json!(-0.001);
    write_json(dir.path(), "lm.json", &lm);
    let r = depsched(
        &["validate", "--config", "instance.json", "--models", "lm.json"],
        dir.path(),
    );
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.stdout.contains("FAIL"));
    assert!(r.stderr.contains("beta >= 0"), "{}", r.stderr);
    assert!(r.stderr.contains("t_e.beta = -0.001"), "{}", r.stderr);
}

#[test]
fn config_needs_models() {
    let (dir, _, _) = setup();
    assert_eq!(depsched(&["validate", "--config", "instance.json"], dir.path()).code, 2);
    assert_eq!(depsched(&["validate", "--bounds", "4,4"], dir.path()).code, 2);
    assert_eq!(
        depsched(&["validate", "--mem-cap", "4", "--instances", "1"], dir.path()).code,
        2
    );
}

#[test]
fn manifest_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let r = depsched(
        &["validate", "--instances", "1", "--seed", "7", "--manifest", "m.json"],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = read_json(&dir.path().join("m.json"));
    assert_eq!(m["command"], "validate");
    assert_eq!(m["seed"], 7);
}
