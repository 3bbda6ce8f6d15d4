use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn streamscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success() || out.status.code() == Some(2),
        "{out:?}"
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn model_transfer_time() {
    let out = streamscore(&[
        "--json", "model", "--size", "0.5GB", "--bw", "25Gbps", "--alpha", "1", "--theta", "1",
        "--work", "0FLOP",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["breakdown"]["t_transfer"].as_f64().unwrap(), 0.16);
    assert_eq!(v["tier"], "Tier 1");
}

#[test]
fn model_rejects_theta_below_one() {
    let out = streamscore(&[
        "model", "--size", "0.5GB", "--bw", "25Gbps", "--theta", "0.5", "--work", "0FLOP",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("theta must be ≥ 1"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn model_missing_bandwidth_is_usage_error() {
    let out = streamscore(&["model", "--size", "0.5GB", "--work", "0FLOP"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bw"));
}

#[test]
fn model_needs_rates_for_nonzero_work() {
    let out = streamscore(&[
        "model", "--size", "1GB", "--bw", "25Gbps", "--work", "1TFLOP",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn model_infeasible_source_exits_two() {
    let out = streamscore(&[
        "--json",
        "model",
        "--size",
        "4GB",
        "--bw",
        "25Gbps",
        "--work",
        "20TFLOP",
        "--local-rate",
        "5TF",
        "--remote-rate",
        "20TF",
        "--interval",
        "1s",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["decision"]["choice"], "infeasible");
}

#[test]
fn model_speed_score_and_decision() {
    let out = streamscore(&[
        "--json",
        "model",
        "--size",
        "0.5GB",
        "--bw",
        "25Gbps",
        "--work",
        "10TFLOP",
        "--local-rate",
        "1TF",
        "--remote-rate",
        "100TF",
        "--worst",
        "5s",
    ]);
    let v = json(&out);
    assert!((v["sss"].as_f64().unwrap() - 31.25).abs() < 1e-9);
    assert_eq!(v["decision"]["choice"], "remote_stream");
    // the decision is taken against the worst case, 5 s + 0.1 s
    assert!((v["decision"]["breakdown"]["t_pct"].as_f64().unwrap() - 5.1).abs() < 1e-9);
}

#[test]
fn unknown_flag_and_help_exit_codes() {
    assert_eq!(streamscore(&["model", "--bogus"]).status.code(), Some(1));
    assert_eq!(streamscore(&["--help"]).status.code(), Some(0));
    assert_eq!(streamscore(&["--version"]).status.code(), Some(0));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sim.jsonl");
    let out = streamscore(&[
        "--json",
        "simulate",
        "--bw",
        "25Gbps",
        "--duration",
        "10s",
        "--concurrency",
        "8",
        "--size",
        "0.5GB",
        "--mode",
        "simultaneous",
        "--out",
        path_str(&log),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["records"], 80);

    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 81);
    let header: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let run = &header["run"];
    assert_eq!(run["link"]["bandwidth"], 3.125e9);
    assert_eq!(run["link"]["alpha"], 1.0);
    assert_eq!(run["duration"], 10.0);
    assert_eq!(run["concurrency"], 8.0);
    assert_eq!(run["transfer_bytes"], 500_000_000u64);
    assert_eq!(run["mode"], "simultaneous");
    assert!(run["started_unix_ms"].as_u64().is_some());

    let report_dir = dir.path().join("report");
    let out = streamscore(&[
        "--json",
        "analyze",
        "--in",
        path_str(&log),
        "--link-bw",
        "25Gbps",
        "--tiers",
        "1s,10s,60s",
        "--out",
        path_str(&report_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(["low", "moderate", "severe"].contains(&v["regime"]["regime"].as_str().unwrap()));
    assert_eq!(v["stats"]["count"], 80);
    assert_eq!(v["delay"]["continuum_label"], "optimistic baseline");
    assert!(report_dir.join("report.json").exists());
    assert!(report_dir.join("series_cdf.csv").exists());
}

#[test]
fn simulate_config_file_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.txt");
    std::fs::write(
        &cfg,
        "bandwidth = 25Gbps\nduration = 1s\nconcurrency = 8\ntransfer_bytes = 0.5GB\nstartup_latency = 0s\n",
    )
    .unwrap();
    let log = dir.path().join("a.jsonl");
    let out = streamscore(&[
        "--json",
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&log),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["max_fct"].as_f64().unwrap(), 1.28);

    let out = streamscore(&[
        "--json",
        "simulate",
        "--config",
        path_str(&cfg),
        "--concurrency",
        "4",
        "--compare",
        path_str(&log),
    ]);
    let v = json(&out);
    assert_eq!(v["comparison"]["kind"], "runs");
    assert!((v["comparison"]["ratios"]["max"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn sweep_writes_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let out = streamscore(&[
        "--json",
        "simulate",
        "--sweep",
        "--bw",
        "25Gbps",
        "--duration",
        "10s",
        "--size",
        "0.5GB",
        "--concurrency",
        "1,2,4,8",
        "--parallel",
        "2,4,8",
        "--mode",
        "simultaneous,scheduled",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out).as_array().unwrap().len(), 24);
    let csv = std::fs::read_to_string(dir.path().join("series_worst_fct_vs_load.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "offered_load,mode,concurrency,parallel_flows,worst_fct_s,sss,utilization"
    );
    assert_eq!(lines.count(), 24);
}

#[test]
fn single_run_rejects_lists() {
    let out = streamscore(&[
        "simulate",
        "--bw",
        "25Gbps",
        "--duration",
        "1s",
        "--size",
        "1GB",
        "--concurrency",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_empty_log_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = streamscore(&["analyze", "--in", path_str(&empty)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn casestudy_default_budgets() {
    let out = streamscore(&["--json", "casestudy"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0]["tiers"][1]["budget"].as_f64().unwrap() - 8.8).abs() < 1e-9);
    assert_eq!(rows[1]["infeasible"], true);
    assert!((rows[2]["tiers"][1]["budget"].as_f64().unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn casestudy_input_file_with_units() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cs.json");
    std::fs::write(
        &input,
        r#"{
            "workflows": [{"name": "w", "throughput": "1GB/s", "compute": "10TF"}],
            "link": {"bandwidth": "10Gbps", "alpha": 1.0},
            "worst_fct_curve": [
                {"utilization": 0.5, "worst_fct": "500ms"},
                {"utilization": 0.9, "worst_fct": "2s"}
            ]
        }"#,
    )
    .unwrap();
    let saved = dir.path().join("out.json");
    let out = streamscore(&[
        "--json",
        "casestudy",
        "--input",
        path_str(&input),
        "--out",
        path_str(&saved),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = json(&out);
    assert!((rows[0]["utilization"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!((rows[0]["worst_fct"].as_f64().unwrap() - 1.625).abs() < 1e-12);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(saved).unwrap()).unwrap();
    assert_eq!(saved, rows);
}
