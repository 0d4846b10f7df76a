//! End-to-end tests of the `cumout` binary: every subcommand, the file
//! formats it emits, and the exit-code / error-prefix contract.

use std::path::Path;
use std::process::{Command, Output};

fn cumout() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cumout"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    cumout()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Small dataset shared by the detector tests.
fn gen_small(dir: &Path) {
    let out = run(
        &[
            "gen", "--t", "300", "--tau", "30", "--n", "8", "--nu-c", "6", "--nu-u", "6",
            "--seed", "5", "--out", "ds",
        ],
        dir,
    );
    assert!(out.status.success());
}

#[test]
fn gen_writes_three_files_with_correct_label_sum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen", "--t", "1000", "--n", "30", "--tau", "100", "--nu-c", "6", "--nu-u", "6",
            "--seed", "7", "--out", "ds",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ds = tmp.path().join("ds");
    let labels = std::fs::read_to_string(ds.join("labels.csv")).unwrap();
    let sum: u32 = labels.lines().map(|l| l.trim().parse::<u32>().unwrap()).sum();
    assert_eq!(sum, 100);
    assert_eq!(labels.lines().count(), 1000);
    let data = std::fs::read_to_string(ds.join("data.csv")).unwrap();
    assert_eq!(data.lines().next().unwrap().split(',').count(), 30);
    assert_eq!(data.lines().count(), 1001);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ds.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["nu_c"], 6);
    assert_eq!(meta["sigma"].as_array().unwrap().len(), 30);
    assert_eq!(meta["subset"].as_array().unwrap().len(), 15);
}

#[test]
fn gen_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = run(
            &[
                "gen", "--t", "120", "--tau", "12", "--n", "4", "--seed", "9", "--out", sub,
            ],
            tmp.path(),
        );
        assert!(out.status.success());
    }
    let a = std::fs::read(tmp.path().join("a/data.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/data.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn detect_c4_reports_parameters_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let out = run(
        &["detect", "c4", "--data", "ds/data.csv", "--beta", "2.5", "--r", "3"],
        tmp.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["r"], 3);
    assert_eq!(v["beta"], 2.5);
    assert!(v["flagged"].as_array().unwrap().iter().all(|j| {
        let j = j.as_u64().unwrap();
        (1..=300).contains(&j)
    }));
    assert!(!v["iterations"].as_array().unwrap().is_empty());
}

#[test]
fn detect_rx_percentile_and_threshold_modes() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let by_pct = stdout_json(&run(
        &["detect", "rx", "--data", "ds/data.csv", "--percentile", "0.99"],
        tmp.path(),
    ));
    assert!(by_pct["threshold"].as_f64().unwrap() > 0.0);
    let cut = by_pct["threshold"].as_f64().unwrap();
    let by_raw = stdout_json(&run(
        &["detect", "rx", "--data", "ds/data.csv", "--threshold", &cut.to_string()],
        tmp.path(),
    ));
    assert_eq!(by_pct["flagged"], by_raw["flagged"]);
    // exactly one of the two modes must be given
    let neither = run(&["detect", "rx", "--data", "ds/data.csv"], tmp.path());
    assert_eq!(neither.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&neither.stderr).starts_with("ERROR(usage):"));
}

#[test]
fn roc_emits_csv_with_auc_footer() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let out = run(
        &[
            "roc", "--data", "ds/data.csv", "--labels", "ds/labels.csv", "--detector", "c4",
            "--r", "2", "--grid", "2.0:3.0:0.5", "--out", "roc.csv",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(tmp.path().join("roc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "beta,fpr,tpr");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 4); // 3 grid points + auc footer
    assert!(body.last().unwrap().starts_with("auc,"));
    // rx sweep shares the grid cardinality
    let rx = run(
        &[
            "roc", "--data", "ds/data.csv", "--labels", "ds/labels.csv", "--detector", "rx",
            "--grid", "2.0:3.0:0.5",
        ],
        tmp.path(),
    );
    let rx_text = String::from_utf8_lossy(&rx.stdout).to_string();
    assert_eq!(rx_text.lines().count(), 5);
}

#[test]
fn roc_rejects_degenerate_labels_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    std::fs::write(tmp.path().join("zeros.csv"), "0\n".repeat(300)).unwrap();
    let out = run(
        &["roc", "--data", "ds/data.csv", "--labels", "zeros.csv"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).starts_with("ERROR(data):"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn experiment_runs_from_config_file_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "t": 160, "tau": 16, "n": 5, "nu_c": 6, "nu_u": 6.0, "r": 2,
        "beta_grid": {"start": 2.0, "stop": 3.0, "step": 0.5},
        "seeds": 2, "detectors": "both"
    }"#;
    std::fs::write(tmp.path().join("cfg.json"), cfg).unwrap();
    let a = run(&["experiment", "--config", "cfg.json"], tmp.path());
    let b = run(&["experiment", "--config", "cfg.json"], tmp.path());
    let va = stdout_json(&a);
    assert_eq!(a.stdout, b.stdout, "experiment output not deterministic");
    assert_eq!(va["per_seed"].as_array().unwrap().len(), 2);
    assert!(va["c4"]["mean_auc"].as_f64().is_some());
    assert!(va["rx"]["median_auc"].as_f64().is_some());
    // flags form works too and respects the seed list
    let flags = run(
        &[
            "experiment", "--t", "160", "--tau", "16", "--n", "5", "--r", "2", "--grid",
            "2.0:3.0:0.5", "--seed-list", "2,1", "--detectors", "c4",
        ],
        tmp.path(),
    );
    let vf = stdout_json(&flags);
    assert_eq!(vf["per_seed"][0]["seed"], 1);
    assert!(vf["rx"].is_null());
}

#[test]
fn cumulants_emits_tensor_json() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let v = stdout_json(&run(
        &["cumulants", "--data", "ds/data.csv", "--order", "4"],
        tmp.path(),
    ));
    assert_eq!(v["order"], 4);
    assert_eq!(v["dim"], 8);
    // C(8+3, 4) unique entries
    assert_eq!(v["entries"].as_array().unwrap().len(), 330);
    let first = v["entries"][0].as_array().unwrap();
    assert_eq!(first.len(), 5);
    // bad order is a usage error
    let bad = run(&["cumulants", "--data", "ds/data.csv", "--order", "7"], tmp.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn mi_reports_split_and_total() {
    let tmp = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(&["mi", "--nu", "6", "--n", "30"], tmp.path()));
    let i_nu_n = v["i_nu_n"].as_f64().unwrap();
    assert!((i_nu_n - 1.604_280_290_840_918).abs() < 1e-6);
    assert_eq!(v["i_sigma"].as_f64().unwrap(), 0.0);
    assert_eq!(
        v["total"].as_f64().unwrap(),
        v["i_sigma"].as_f64().unwrap() + i_nu_n
    );
    // with a Σ file the Gaussian part turns on
    std::fs::write(tmp.path().join("sigma.csv"), "1.0,0.5\n0.5,1.0\n").unwrap();
    let v2 = stdout_json(&run(
        &["mi", "--nu", "6", "--sigma", "sigma.csv"],
        tmp.path(),
    ));
    assert!((v2["i_sigma"].as_f64().unwrap() - 0.143_841_036_225_89).abs() < 1e-9);
    // n defaults to the Σ dimension
    assert!(v2["i_nu_n"].as_f64().unwrap() > 0.0);
    // without either, usage error
    let bad = run(&["mi", "--nu", "6"], tmp.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn ingest_converts_prices_to_log_increments() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("prices.csv"),
        "date,AAA,BBB\n2020-01-01,100,50\n2020-01-02,110,49\n2020-01-03,105,51\n",
    )
    .unwrap();
    let out = run(&["ingest", "--prices", "prices.csv"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "AAA,BBB");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!((first[0] - (110.0f64 / 100.0).ln()).abs() < 1e-12);
    assert_eq!(text.lines().count(), 3);
    // non-positive price is a data error with the ingest prefix
    std::fs::write(
        tmp.path().join("bad.csv"),
        "date,AAA\n2020-01-01,100\n2020-01-02,-5\n2020-01-03,101\n",
    )
    .unwrap();
    let bad = run(&["ingest", "--prices", "bad.csv"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("ERROR(data):"));
}

#[test]
fn unknown_arguments_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["definitely-not-a-command"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR(usage):"));
    // --help succeeds
    let help = run(&["--help"], tmp.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("cumout"));
}

#[test]
fn detect_on_missing_file_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["detect", "c4", "--data", "nope.csv", "--beta", "2.0", "--r", "2"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR(data):"));
}

#[test]
fn singular_covariance_is_numeric_error() {
    let tmp = tempfile::tempdir().unwrap();
    // constant second column
    let mut text = String::from("m1,m2\n");
    for i in 0..50 {
        text.push_str(&format!("{}.5,3\n", i % 7));
    }
    std::fs::write(tmp.path().join("flat.csv"), text).unwrap();
    let out = run(
        &["detect", "c4", "--data", "flat.csv", "--beta", "2.0", "--r", "1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR(numeric):"));
}
