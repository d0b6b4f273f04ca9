use std::path::Path;
use std::process::{Command, Output};

fn castguard(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_castguard"))
        .args(args)
        .current_dir(dir)
        .env_remove("CASTGUARD_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path, n: &str) {
    ok(&castguard(&["synth", "--n-per-class", n, "--dim", "6", "--seed", "3", "--out", "d.fmx"], dir));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn synth_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let out = castguard(&["inspect", "d.fmx"], dir.path());
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rows:       2"), "{text}");
    assert!(text.contains("defect:     1"));

    let bad = castguard(&["synth", "--dim", "0", "--out", "x.fmx"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("x.fmx").exists());
}

#[test]
fn bench_writes_one_row_per_classifier_run() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "40");
    let out = castguard(
        &["bench", "--input", "d.fmx", "--classifiers", "linear_svm,mlp", "--runs", "5", "--out", "r"],
        dir.path(),
    );
    ok(&out);
    let rows = csv_rows(&dir.path().join("r/per-run.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[7] == "ok"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["synth"]["linear_svm"]["runs"], 5);
    assert!(dir.path().join("r/config-echo.json").exists());
    assert!(String::from_utf8(out.stdout).unwrap().contains("Linear SVM"));
}

#[test]
fn failed_runs_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "20");
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"classifiers": ["gaussian_process", "knn"], "runs": 2,
            "hyperparameters": [{"kind": "gaussian_process", "max_newton_iters": 1}]}"#,
    )
    .unwrap();
    ok(&castguard(&["bench", "--config", "cfg.json", "--input", "d.fmx", "--out", "r"], dir.path()));
    let rows = csv_rows(&dir.path().join("r/per-run.csv"));
    let gp: Vec<_> = rows.iter().filter(|r| r[1] == "gaussian_process").collect();
    assert_eq!(gp.len(), 2);
    assert!(gp.iter().all(|r| r[7].starts_with("failed") && r[3].is_empty()));
    assert!(rows.iter().filter(|r| r[1] == "knn").all(|r| r[7] == "ok"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    // overlapping classes so that different splits give different scores
    ok(&castguard(&["synth", "--n-per-class", "30", "--dim", "4", "--separation", "1.5", "--out", "d.fmx"], dir.path()));
    for out in ["a", "b"] {
        ok(&castguard(
            &["bench", "--input", "d.fmx", "--classifiers", "rf,mlp,knn", "--runs", "3", "--seed", "9", "--out", out],
            dir.path(),
        ));
    }
    let a = std::fs::read(dir.path().join("a/per-run.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/per-run.csv")).unwrap();
    assert_eq!(a, b);
    ok(&castguard(
        &["bench", "--input", "d.fmx", "--classifiers", "rf,mlp,knn", "--runs", "3", "--seed", "10", "--out", "c"],
        dir.path(),
    ));
    assert_ne!(a, std::fs::read(dir.path().join("c/per-run.csv")).unwrap());
}

#[test]
fn seed_env_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "20");
    let run = |out: &str, seed_flag: Option<&str>| {
        let mut args = vec!["bench", "--input", "d.fmx", "--classifiers", "rf", "--runs", "2", "--out", out];
        if let Some(s) = seed_flag {
            args.extend(["--seed", s]);
        }
        let o = Command::new(env!("CARGO_BIN_EXE_castguard"))
            .args(&args)
            .current_dir(dir.path())
            .env("CASTGUARD_SEED", "77")
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        ok(&o);
        let echo: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(out).join("config-echo.json")).unwrap()).unwrap();
        echo["master_seed"].as_u64().unwrap()
    };
    assert_eq!(run("env", None), 77);
    assert_eq!(run("flag", Some("5")), 5);
}

#[test]
fn uq_reports_sweep_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "40");
    let out = castguard(
        &["uq", "--input", "d.fmx", "--members", "3", "--epochs", "10", "--out", "u", "--save-ensemble"],
        dir.path(),
    );
    ok(&out);
    let u = dir.path().join("u");
    assert_eq!(csv_rows(&u.join("sweep-synth.csv")).len(), 9);
    let assessment = csv_rows(&u.join("assessment-synth.csv"));
    assert_eq!(assessment.len(), 20);
    let hist = csv_rows(&u.join("histogram-synth.csv"));
    assert_eq!(hist.len(), 20);
    let total: usize = hist.iter().map(|r| r[3].parse::<usize>().unwrap() + r[4].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 20);
    assert!(u.join("ensemble-synth.cgmb").exists());

    let map = castguard(
        &["pca-map", "--input", "d.fmx", "--ensemble", "u/ensemble-synth.cgmb", "--out", "m"],
        dir.path(),
    );
    ok(&map);
    let rows = csv_rows(&dir.path().join("m/map-synth.csv"));
    // the loaded ensemble reproduces the assessment entropies
    for (m, a) in rows.iter().zip(&assessment) {
        assert_eq!(m[3], a[2]);
    }
}

#[test]
fn pca_map_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "50");
    for out in ["a", "b"] {
        ok(&castguard(
            &["pca-map", "--input", "d.fmx", "--members", "2", "--epochs", "5", "--out", out],
            dir.path(),
        ));
    }
    let path = dir.path().join("a/map-synth.csv");
    let rows = csv_rows(&path);
    // stratified 75% split of 50 + 50 keeps 38 + 38 for training
    assert_eq!(rows.len(), 24);
    for r in &rows {
        let pc1: f64 = r[1].parse().unwrap();
        let h: f64 = r[3].parse().unwrap();
        assert!(pc1.is_finite());
        assert!((0.0..=1.0).contains(&h));
    }
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("b/map-synth.csv")).unwrap());

    ok(&castguard(
        &["pca-map", "--input", "d.fmx", "--members", "2", "--epochs", "5", "--train-on-pca", "--out", "c"],
        dir.path(),
    ));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/summary.json")).unwrap()).unwrap();
    assert_eq!(s["synth"]["trained_on_pca"], true);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(castguard(&["bench", "--input", "missing.fmx", "--out", "r"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("junk.fmx"), b"not a feature file").unwrap();
    assert_eq!(castguard(&["inspect", "junk.fmx"], dir.path()).status.code(), Some(3));
    assert_eq!(castguard(&["bench", "--runs", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(castguard(&["uq", "--threshold", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(castguard(&["bench", "--classifiers", "svm9"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(castguard(&["bench", "--config", "bad.json"], dir.path()).status.code(), Some(2));

    // a single-class dataset cannot train the ensemble
    std::fs::write(dir.path().join("one.csv"), "a,b,label\n0,1,1\n1,0,1\n2,2,1\n3,1,1\n").unwrap();
    let out = castguard(&["uq", "--input", "one.csv", "--members", "2", "--out", "u"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
