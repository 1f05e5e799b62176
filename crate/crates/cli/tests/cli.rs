use std::fs;
use std::path::Path;
use std::process::Command;

use ergopoint_cli::{execute, plot_csv, run, ExperimentConfig, ExperimentKind, RunError, RunManifest, SeriesKind};
use serde_json::json;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ergopoint"));
    c.env_remove("ERGOPOINT_OUT_DIR");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_manifest_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(ExperimentKind::PppVerify).with_seed(42).with_replicates(500);
    let m = run(&cfg, dir.path()).unwrap();
    assert!(m.overall_pass);
    assert_eq!(m.overall_pass, m.reports.iter().all(|r| r.pass));
    let names: Vec<&str> = m.reports.iter().map(|r| r.test_name.as_str()).collect();
    assert_eq!(names, ["void_prob_test", "poisson_gof"]);

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("testName,statistic,pValue,pass,N,seed"));
    assert!(lines.next().unwrap().starts_with("void_prob_test,"));

    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert_eq!(RunManifest::from_json(&text).unwrap(), m);
}

#[test]
fn manifests_roundtrip_for_every_experiment() {
    for kind in [
        ExperimentKind::PppVerify,
        ExperimentKind::Equivariance,
        ExperimentKind::LevySquare,
        ExperimentKind::Mollify,
        ExperimentKind::OrdersUniform,
        ExperimentKind::BackAndForth,
        ExperimentKind::Whirly,
        ExperimentKind::Counterexample,
    ] {
        let m = execute(&ExperimentConfig::new(kind).with_seed(3).with_replicates(50)).unwrap();
        let back = RunManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m, "{kind}");
        // the echoed config is complete, so re-running it reproduces the reports
        assert_eq!(execute(&back.config).unwrap().reports, m.reports, "{kind}");
    }
}

#[test]
fn same_seed_same_reports() {
    let cfg = ExperimentConfig::new(ExperimentKind::Whirly).with_seed(9).with_replicates(200);
    let (a, b) = (execute(&cfg).unwrap(), execute(&cfg).unwrap());
    assert_eq!(a.reports_json().unwrap(), b.reports_json().unwrap());
    assert_eq!(a.summary_csv().unwrap(), b.summary_csv().unwrap());
    let other = execute(&cfg.clone().with_seed(10)).unwrap();
    assert_ne!(a.reports_json().unwrap(), other.reports_json().unwrap());
}

#[test]
fn invalid_config_fails_before_sampling() {
    let cfg = ExperimentConfig::from_json(r#"{"experiment": "ppp-verify", "alpha": 1.5}"#).unwrap();
    assert!(matches!(execute(&cfg), Err(RunError::Config(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), r#"{"experiment": "ppp-verify", "alpha": 1.5}"#);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg("--config").arg(&path).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn series_are_emitted_with_headers() {
    let m = execute(&ExperimentConfig::new(ExperimentKind::PppVerify).with_replicates(300)).unwrap();
    let csv = plot_csv(&m, SeriesKind::CountHistogram).unwrap();
    assert!(csv.starts_with("k,observed,expected\n0,"));
    let total: f64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert_eq!(total, 300.0);
    assert!(matches!(plot_csv(&m, SeriesKind::DivergenceTrace), Err(RunError::MissingSeries(_))));

    let c = execute(&ExperimentConfig::new(ExperimentKind::Counterexample).with_replicates(10)).unwrap();
    assert!(plot_csv(&c, SeriesKind::DivergenceTrace).unwrap().starts_with("n_terms,partial_sum\n1,"));
    let p = ExperimentConfig::new(ExperimentKind::Mollify)
        .with_replicates(2)
        .with_parameters(json!({"grid_size": 256, "epsilons": [0.0625]}));
    let csv = plot_csv(&execute(&p).unwrap(), SeriesKind::MollificationProfile).unwrap();
    assert!(csv.starts_with("x,f,delta_conv_f\n"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn binary_flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), r#"{"experiment": "whirly", "seed": 1, "replicates": 30}"#);
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--seed", "5", "--replicates", "40", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!((m.config.seed, m.config.replicates), (5, 40));
    assert_eq!(m.config.parameters, json!({"depth": 8}));

    let status = bin()
        .args(["emit", "--kind", "count-histogram", "--manifest"])
        .arg(out.join("manifest.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_uses_env_out_dir_and_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    // a classification threshold no sample can meet makes the run fail
    let path = write_config(
        dir.path(),
        r#"{"experiment": "counterexample", "replicates": 20, "parameters": {"sample_bits": 10, "candidates": [6, 7], "min_accuracy": 1.0}}"#,
    );
    let out = dir.path().join("from-env");
    let output = bin().arg("run").arg("--config").arg(&path).env("ERGOPOINT_OUT_DIR", &out).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("classify_frequency"));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert!(!m.overall_pass);

    let status = bin()
        .args(["emit", "--kind", "divergence-trace", "--manifest"])
        .arg(out.join("manifest.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(fs::read_to_string(out.join("divergence-trace.csv")).unwrap().starts_with("n_terms,partial_sum"));
}
