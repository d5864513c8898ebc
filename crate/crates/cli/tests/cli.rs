use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn escfr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escfr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ESCFR_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn generate(dir: &Path, n: usize) -> PathBuf {
    write(
        dir,
        "spec.json",
        &format!(r#"{{"N": {n}, "d": 3, "bias_strength": 1.5, "seed": 4}}"#),
    );
    let o = escfr(&["generate", "--spec", "spec.json", "--out", "data.csv"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    dir.join("data.csv")
}

const QUICK: &str = r#"{"max_epochs": 4, "hidden": 8, "batch_size": 32, "seed": 3}"#;

#[test]
fn generate_writes_rows_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), 50);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x0,x1,x2,t,y,mu0,mu1");
    assert_eq!(lines.count(), 50);
    let sidecar = std::fs::read_to_string(dir.path().join("data.spec.json")).unwrap();
    assert!(sidecar.contains("\"N\": 50"));

    let first = std::fs::read(&data).unwrap();
    generate(dir.path(), 50);
    assert_eq!(std::fs::read(&data).unwrap(), first);
}

#[test]
fn generate_rejects_empty_dataset_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", r#"{"N": 0, "d": 3}"#);
    let o = escfr(&["generate", "--spec", "bad.json", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`N`"), "{}", stderr(&o));

    write(dir.path(), "typo.json", r#"{"N": 10, "d": 3, "bias": 1}"#);
    let o = escfr(&["generate", "--spec", "typo.json", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bias"));
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 200);
    write(dir.path(), "cfg.json", QUICK);
    for out in ["run1", "run2"] {
        let o = escfr(&["train", "--data", "data.csv", "--config", "cfg.json", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let r1 = std::fs::read(dir.path().join("run1/report.json")).unwrap();
    let r2 = std::fs::read(dir.path().join("run2/report.json")).unwrap();
    assert_eq!(r1, r2);

    let report: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    assert_eq!(report["estimator"], "escfr");
    assert_eq!(report["discrepancy_active"], true);
    assert!(report.get("epoch_seconds").is_none());

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run1/manifest.json")).unwrap()).unwrap();
    let cfg: escfr_core::training::TrainConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    let cfg_bytes = serde_json::to_vec(&cfg).unwrap();
    let hash = hex::encode(Sha256::digest(&cfg_bytes));
    assert_eq!(manifest["config_hash"], hash);
    let data_hash = hex::encode(Sha256::digest(std::fs::read(dir.path().join("data.csv")).unwrap()));
    assert_eq!(manifest["dataset_fingerprint"], data_hash);

    let metrics = std::fs::read_to_string(dir.path().join("run1/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert!(metrics.lines().nth(1).unwrap().starts_with("escfr,validation,"));
    assert!(dir.path().join("run1/best.ckpt").exists());
    assert!(dir.path().join("run1/timing.json").exists());
}

#[test]
fn train_marks_lambda_zero_as_tarnet() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 200);
    write(dir.path(), "cfg.json", r#"{"lambda": 0, "max_epochs": 2, "hidden": 8}"#);
    let o = escfr(&["train", "--data", "data.csv", "--config", "cfg.json", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["estimator"], "tarnet");
    assert_eq!(report["discrepancy_active"], false);
}

#[test]
fn diverging_training_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 200);
    write(dir.path(), "cfg.json", r#"{"learning_rate": 1e300, "max_epochs": 3, "hidden": 8}"#);
    let o = escfr(&["train", "--data", "data.csv", "--config", "cfg.json", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("epoch"));
    assert!(dir.path().join("run/manifest.json").exists());
}

#[test]
fn invalid_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 60);
    write(dir.path(), "cfg.json", r#"{"batch_size": 0}"#);
    let o = escfr(&["train", "--data", "data.csv", "--config", "cfg.json", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batch_size"));
}

#[test]
fn eval_checkpoint_and_baselines() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 200);
    write(dir.path(), "cfg.json", QUICK);
    let o = escfr(&["train", "--data", "data.csv", "--config", "cfg.json", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0));

    let o = escfr(
        &["eval", "--data", "data.csv", "--checkpoint", "run/best.ckpt", "--split", "test", "--metrics", "m.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"split\": \"out-sample\""));

    let o = escfr(&["eval", "--data", "data.csv", "--estimator", "ols", "--split", "train", "--metrics", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("treatment_coef"));
    let o = escfr(&["eval", "--data", "data.csv", "--estimator", "knn", "--metrics", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let m = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(m.lines().count(), 4);

    let o = escfr(&["eval", "--data", "data.csv", "--checkpoint", "missing.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_without_true_effects_omits_pehe() {
    let dir = tempfile::tempdir().unwrap();
    let full = std::fs::read_to_string(generate(dir.path(), 120)).unwrap();
    let stripped: String = full
        .lines()
        .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    write(dir.path(), "nomu.csv", &stripped);
    let o = escfr(&["eval", "--data", "nomu.csv", "--estimator", "ols", "--metrics", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(stdout(&o).split_once('\n').unwrap().1).unwrap();
    assert!(report["pehe"].is_null());
    assert!(report["auuc"].is_number());
}

#[test]
fn ols_recovers_linear_treatment_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("x0,x1,t,y\n");
    for i in 0..40 {
        let (x0, x1) = ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        let t = i % 2;
        body += &format!("{x0},{x1},{t},{}\n", 1.0 + 2.0 * x0 - x1 + 1.5 * t as f64);
    }
    write(dir.path(), "lin.csv", &body);
    let o = escfr(&["eval", "--data", "lin.csv", "--estimator", "ols", "--metrics", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().next().unwrap().to_string();
    let coef: f64 = line.strip_prefix("treatment_coef ").unwrap().parse().unwrap();
    assert!((coef - 1.5).abs() < 1e-6);
}

#[test]
fn sweep_runs_product_and_aggregates_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 160);
    write(
        dir.path(),
        "grid.json",
        r#"{"lambda": [0, 1], "kappa": [1, "inf"], "gamma": [0], "seeds": [0, 1],
            "base": {"max_epochs": 2, "hidden": 8}}"#,
    );
    let o = escfr(&["sweep", "--data", "data.csv", "--grid", "grid.json", "--out", "s1", "--jobs", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = escfr(&["sweep", "--data", "data.csv", "--grid", "grid.json", "--out", "s2", "--jobs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read_to_string(dir.path().join("s1/results.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("s2/results.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
    let runs = std::fs::read_to_string(dir.path().join("s1/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 9);
    assert!(a.contains(",cfr-wass,"));
    assert!(a.contains(",escfr-rmpr,"));
}

#[test]
fn sweep_keeps_going_past_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 160);
    write(
        dir.path(),
        "grid.json",
        r#"{"epsilon": [0.5, -1], "seeds": [0], "base": {"max_epochs": 2, "hidden": 8}}"#,
    );
    let o = escfr(&["sweep", "--data", "data.csv", "--grid", "grid.json", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs = std::fs::read_to_string(dir.path().join("s/runs.csv")).unwrap();
    assert!(runs.contains(",ok,"));
    assert!(runs.contains(",failed,"));
}

#[test]
fn ot_identical_sets_cost_nothing_and_balance_rows() {
    let dir = tempfile::tempdir().unwrap();
    let pts = "u,v\n0,0\n1,0\n0,1\n3,3\n";
    write(dir.path(), "a.csv", pts);
    write(dir.path(), "b.csv", pts);
    let o = escfr(&["ot", "--a", "a.csv", "--b", "b.csv", "--epsilon", "0.01"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let cost: f64 = out.lines().next().unwrap().strip_prefix("cost ").unwrap().parse().unwrap();
    assert!(cost < 1e-6);
    let coupling = std::fs::read_to_string(dir.path().join("coupling.csv")).unwrap();
    for row in coupling.lines().skip(1) {
        let s: f64 = row.split(',').map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 0.25).abs() < 1e-6);
    }

    write(dir.path(), "bad.csv", "u,v\n0,zero\n");
    let o = escfr(&["ot", "--a", "bad.csv", "--b", "b.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("column `v`"));
}

#[test]
fn bench_emits_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = escfr(
        &[
            "bench", "--sizes", "4,8", "--epsilons", "1,10", "--kappas", "1,10", "--reps", "2", "--n", "6",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "sweep,algorithm,n,epsilon,kappa,reps,mean_seconds,std_seconds,mean_iterations"
    );
    assert_eq!(csv.lines().count(), 1 + 4 + 4 + 2);

    let o = escfr(&["bench", "--sizes", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flags_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = escfr(&["train", "--nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
