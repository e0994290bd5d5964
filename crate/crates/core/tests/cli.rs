use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use burstlr::io::read_observations;
use burstlr::simharness::{generate_h0, ScenarioSpec};
use burstlr::{bin_observations, calibrate_alpha, correlation_matrix, lambda_new, reject_new, DecisionConfig, LrKind};
use burstlr::decision::CalibrationTarget;
use serde_json::Value;

fn burstlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burstlr")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_then_detect_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = burstlr(&["simulate", "--theta0", "2", "--P", "8", "--counts", "40", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let spec = ScenarioSpec::poisson_simple(2.0, 8, 4, 40, 1, 3).unwrap();
    let expected = generate_h0(&spec, 0).unwrap();
    let read = bin_observations(&read_observations(&out.join("data.csv")).unwrap(), 8).unwrap();
    assert_eq!(read, expected);

    let det = dir.path().join("det");
    let o = burstlr(&[
        "detect", "--null", "lambda=2", "--P", "8", "--G", "4", "--k", "1", "--alpha", "0.05",
        "--input", out.join("data.csv").to_str().unwrap(), "--out", det.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&det.join("report.json"));
    assert_eq!(report["counts"], serde_json::json!([40, 40, 40, 40, 40, 40, 40, 40]));
    assert_eq!(report["dropped"], 0);
    assert_eq!(report["sliding"]["xi"].as_array().unwrap().len(), 5);
    assert_eq!(report["standard"]["xi"].as_array().unwrap().len(), 2);

    let lr = lambda_new(&expected, &spec.model, &spec.null, 4).unwrap();
    let xi: Vec<f64> = report["sliding"]["xi"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(xi, lr.xis());

    let windows = fs::read_to_string(det.join("windows.csv")).unwrap();
    let mut lines = windows.lines();
    assert_eq!(lines.next(), Some("procedure,i,first_bin,last_bin,n_obs,lambda,xi,skipped"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn strong_burst_is_found_inside_one_window() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = burstlr(&[
        "simulate", "--theta0", "2", "--P", "12", "--counts", "100", "--burst", "6.2,7.8,8", "--seed", "9",
        "--out", sim.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let det = dir.path().join("det");
    let o = burstlr(&[
        "detect", "--null", "lambda=2", "--P", "12", "--G", "3", "--k", "1", "--level", "0.05", "--seed", "1",
        "--draws", "20000", "--input", sim.join("data.csv").to_str().unwrap(), "--out", det.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&det.join("report.json"));
    assert_eq!(report["sliding"]["verdict"], "reject");
    // Any sliding window (i, i + 2] holding the burst (6.2, 7.8] covers it.
    let covering = [5u64, 6];
    let witness = report["sliding"]["witness"].as_array().unwrap();
    assert!(witness.iter().any(|w| covering.contains(&w.as_u64().unwrap())), "{witness:?}");
    assert_eq!(report["sliding"]["provenance"], "monte_carlo");
    assert_eq!(report["standard"]["provenance"], "binomial");
}

#[test]
fn sliding_only_when_g_does_not_divide_p() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let lines: String = (0..70).map(|i| format!("{{\"t\": {}, \"x\": {}}}\n", 0.1 * (i + 1) as f64, i % 4)).collect();
    fs::write(&input, lines).unwrap();
    let out = dir.path().join("out");
    let o = burstlr(&[
        "detect", "--null", "lambda=2", "--P", "7", "--G", "3", "--k", "1", "--alpha", "0.01",
        "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    assert!(report["standard"].is_null());
    assert_eq!(report["sliding"]["xi"].as_array().unwrap().len(), 5);
}

#[test]
fn calibrate_single_window_gives_chi_squared_quantile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal");
    let o = burstlr(&["calibrate", "--P", "1", "--G", "1", "--k", "1", "--level", "0.05", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let cal = json(&out.join("calibration.json"));
    let c = cal["standard"]["c"].as_f64().unwrap();
    assert!((c - 3.841_458_820_694_126).abs() < 1e-8, "{c}");
    let sliding = cal["sliding"]["c"].as_f64().unwrap();
    assert!((sliding - c).abs() < 0.05, "{sliding}");
}

#[test]
fn sliding_with_unit_windows_matches_standard_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal");
    let o = burstlr(&["calibrate", "--P", "6", "--G", "1", "--k", "2", "--level", "0.05", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let cal = json(&out.join("calibration.json"));
    let st = cal["standard"]["c"].as_f64().unwrap();
    let sl = cal["sliding"]["c"].as_f64().unwrap();
    assert!((st - sl).abs() < 0.1, "{st} vs {sl}");
}

#[test]
fn power_table_has_one_row_per_offset_and_procedure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pow");
    let o = burstlr(&[
        "power", "--counts", "50", "--reps", "50", "--draws", "20000", "--offsets", "0,0.25,0.5,0.75", "--seed", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("power.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    for proc_ in ["standard", "sliding"] {
        for mode in ["equal_alpha", "calibrated"] {
            for hyp in ["h0", "burst"] {
                let n = rows.iter().filter(|r| r.starts_with(&format!("{hyp},")) && r.contains(&format!(",{proc_},{mode},"))).count();
                assert_eq!(n, 4, "{hyp} {proc_} {mode}");
            }
        }
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "t,x\n").unwrap();
    let out = dir.path().join("o");
    let base = ["detect", "--null", "lambda=2", "--P", "4", "--G", "2", "--k", "1", "--alpha", "0.05", "--out", out.to_str().unwrap()];

    let o = burstlr(&[&base[..], &["--input", empty.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no observations"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,x\n0.5,1\n1.5,x\n").unwrap();
    let o = burstlr(&[&base[..], &["--input", bad.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let neg = dir.path().join("neg.csv");
    fs::write(&neg, "t,x\n0.5,-1\n").unwrap();
    let o = burstlr(&[&base[..], &["--input", neg.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(1));

    // An empty window leaves the correlation matrix undefined.
    let sparse = dir.path().join("sparse.csv");
    fs::write(&sparse, "t,x\n0.5,1\n").unwrap();
    let o = burstlr(&[
        "detect", "--null", "lambda=2", "--P", "4", "--G", "2", "--k", "1", "--level", "0.05", "--seed", "1",
        "--input", sparse.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = burstlr(&["calibrate", "--P", "4", "--G", "2", "--k", "1", "--level", "1.5", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = burstlr(&["calibrate", "--P", "4", "--G", "5", "--k", "1", "--level", "0.05", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = burstlr(&["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    let o = burstlr(&["detect", "--alpha", "0.1", "--level", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn calibrated_detection_retains_null_data_at_nominal_rate() {
    let reps = 400;
    let spec = ScenarioSpec::poisson_simple(2.0, 8, 4, 100, reps, 77).unwrap();
    let corr = correlation_matrix(&spec.counts, 4).unwrap();
    let cal = calibrate_alpha(0.05, 1, &CalibrationTarget::Sliding { corr: &corr, r: 1, count: 50_000, seed: 77 }).unwrap();
    let cfg = DecisionConfig::from_threshold(cal.c, 1, 4, LrKind::Sliding).unwrap();
    let retained = (0..reps as u64)
        .filter(|&rep| {
            let data = generate_h0(&spec, rep).unwrap();
            let lr = lambda_new(&data, &spec.model, &spec.null, 4).unwrap();
            !reject_new(&lr, &cfg).unwrap().rejects()
        })
        .count();
    let rate = retained as f64 / reps as f64;
    let se = (0.95f64 * 0.05 / reps as f64).sqrt();
    assert!((rate - 0.95).abs() <= 3.0 * se, "retained {rate}");
}
