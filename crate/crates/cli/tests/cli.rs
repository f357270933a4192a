use std::path::Path;
use std::process::{Command, Output};

fn hawkeslob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkeslob"))
        .args(args)
        .output()
        .expect("spawn hawkeslob")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, model: &str, seed: &str, horizon: &str) {
    let o = hawkeslob(&["simulate", "--model", model, "--seed", seed, "--horizon", horizon, "--out-dir", path(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, "model2", "7", "600");
    simulate(&b, "model2", "7", "600");
    for file in ["hawkes.csv", "classified.csv", "messages.csv", "trades.csv", "quotes.csv", "series.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(!x.is_empty(), "{file} empty");
        assert_eq!(x, y, "{file} differs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn reference_run_has_no_engine_output() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "reference", "3", "600");
    assert!(tmp.path().join("classified.csv").exists());
    assert!(!tmp.path().join("messages.csv").exists());
    assert!(!tmp.path().join("trades.csv").exists());
    // Without an engine the classified stream is the Hawkes stream.
    let hawkes = std::fs::read_to_string(tmp.path().join("hawkes.csv")).unwrap();
    let classified = std::fs::read_to_string(tmp.path().join("classified.csv")).unwrap();
    assert_eq!(hawkes.lines().count(), classified.lines().count());
}

#[test]
fn calibrate_with_zero_iterations_returns_start() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "reference", "2", "1200");
    let out = tmp.path().join("cal");
    let o = hawkeslob(&[
        "calibrate",
        "--input",
        path(&sim.join("classified.csv")),
        "--horizon",
        "1200",
        "--max-iters",
        "0",
        "--out-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(result["theta_hat"], result["start"]);
    assert_eq!(result["iterations"], 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MAE 0.0000"));
}

#[test]
fn validate_at_truth_has_zero_deviation() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "reference", "4", "1200");
    let params = tmp.path().join("params.json");
    std::fs::write(&params, serde_json::to_string(&hawkeslob::hawkes::HawkesParams::baseline_order_flow()).unwrap()).unwrap();
    let out = tmp.path().join("val");
    let o = hawkeslob(&[
        "validate",
        "--input",
        path(&sim.join("classified.csv")),
        "--horizon",
        "1200",
        "--theta-hat",
        path(&params),
        "--out-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(report["deviation"]["mae"], 0.0);
    assert_eq!(report["likelihood_ratio"]["test"]["statistic"], 0.0);
    for m in 1..=10 {
        assert!(out.join(format!("residuals_{m}.csv")).exists());
    }
}

#[test]
fn missing_input_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hawkeslob(&["calibrate", "--input", path(&tmp.path().join("nope.csv"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn bad_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 3, "volume": {"x_m_lo": 20, "x_m_mo": "fifty", "alpha": 1}}"#).unwrap();
    let o = hawkeslob(&["simulate", "--config", path(&cfg), "--out-dir", path(&tmp.path().join("o"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("volume"), "{err}");
    assert!(err.contains("x_m_mo"), "{err}");
    std::fs::write(&cfg, r#"{"sed": 3}"#).unwrap();
    let o = hawkeslob(&["simulate", "--config", path(&cfg), "--out-dir", path(&tmp.path().join("o"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    std::fs::write(&csv, "time_s,type\n0.5,1\n0.7,x\n").unwrap();
    let o = hawkeslob(&["calibrate", "--input", path(&csv), "--horizon", "10", "--out-dir", path(&tmp.path().join("o"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn invalid_horizon_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hawkeslob(&["simulate", "--horizon=-5", "--out-dir", path(tmp.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("horizon_s"));
}

#[test]
fn reproduce_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hawkeslob(&[
        "reproduce",
        "--seeds",
        "1,2",
        "--horizon",
        "300",
        "--skip-calibration",
        "--out-dir",
        path(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("report.md")).unwrap();
    assert!(report.contains("## Seed 2"));
    let counts = std::fs::read_to_string(tmp.path().join("counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 1 + 2 * 10);
    assert!(tmp.path().join("seed-1/model1/classified.csv").exists());
    assert!(tmp.path().join("seed-2/model2/manifest.json").exists());
}
