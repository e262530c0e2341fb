use std::path::Path;
use std::process::{Command, Output};

fn kacpru(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kacpru"))
        .args(args)
        .env_remove("KACPRU_THREADS")
        .output()
        .expect("binary runs")
}

fn numeric_report(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock_s");
    v["config"]["run"].as_object_mut().unwrap().remove("threads");
    v["config"]["run"].as_object_mut().unwrap().remove("out");
    v
}

#[test]
fn dbproj_run_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kacpru(&["experiment", "dbproj", "--n", "3", "--t", "1", "--trials", "20", "--seed", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = numeric_report(dir.path());
    assert_eq!(rep["experiment"], "dbproj");
    assert_eq!(rep["seed"], 1);
    assert_eq!(rep["config"]["run"]["n"], 3);
    assert!(rep["version"].is_string());
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["reference"].is_string()));
    let csv = std::fs::read_to_string(dir.path().join("tables/dbproj.csv")).unwrap();
    assert!(csv.starts_with("n,d,T,t,family,metric,value,stderr,bound,bound_ref,flag"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn negative_trials_is_a_usage_error() {
    let o = kacpru(&["experiment", "dbproj", "--trials", "-1", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));
}

#[test]
fn unknown_experiment_and_family_are_usage_errors() {
    assert_eq!(kacpru(&["experiment", "nonsense"]).status.code(), Some(2));
    let o = kacpru(&["experiment", "distinguish", "--family", "bogus", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(kacpru(&["experiment", "dbproj", "--t", "5", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(kacpru(&["verify", "--n", "1", "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn dense_cap_violation_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kacpru(&[
        "experiment", "dbproj", "--n", "4", "--dense-cap", "8", "--seed", "1", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let o = kacpru(&["experiment", "prf", "--n", "3", "--d", "2", "--T", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let err = String::from_utf8_lossy(&o.stderr);
    let seed: u64 = err.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert_eq!(numeric_report(dir.path())["seed"], seed);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not a secure"));
}

#[test]
fn same_seed_different_threads_gives_identical_numbers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = kacpru(&[
            "experiment", "mixing", "--n", "2", "--T", "8", "--trials", "300", "--seed", "9", "--threads", threads,
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(numeric_report(a.path()), numeric_report(b.path()));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 3, "t": 1, "trials": 10, "seed": 4, "m": 0}"#).unwrap();
    let out = dir.path().join("out");
    let o = kacpru(&[
        "experiment", "dbproj", "--config", cfg.to_str().unwrap(), "--trials", "12", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = numeric_report(&out);
    assert_eq!(rep["config"]["run"]["trials"], 12);
    assert_eq!(rep["config"]["run"]["m"], 0);
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(kacpru(&["experiment", "dbproj", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn distinguish_emits_one_row_per_family_pair_and_metric() {
    let dir = tempfile::tempdir().unwrap();
    let o = kacpru(&[
        "experiment", "distinguish", "--n", "2", "--t", "1", "--m", "0", "--trials", "40", "--seed", "2",
        "--family", "hpc_t1,haar,pr_exact", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tables/distinguish.csv")).unwrap();
    // Three pairs, four metrics each, plus the header.
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn sweep_over_n_collects_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = kacpru(&[
        "sweep", "dbproj", "--over", "n", "--values", "3,4", "--t", "1", "--trials", "10", "--seed", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tables/sweep_dbproj.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
