//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;
use streamscore_core::analysis::{self, ReportContext};
use streamscore_core::fluidsim::{self, Scenario, SpawnMode};
use streamscore_core::model::*;
use streamscore_core::record::{FlowRecord, Status, TransferLog};

type Check = Result<(), String>;
type Criterion = (&'static str, Duration, fn() -> Check);

const GBPS_25: f64 = 25e9 / 8.0;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_streamscore"))
}

fn bin_json(args: &[&str]) -> Result<Value, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn case_study() -> Check {
    let rows = bin_json(&["--json", "casestudy"])?;
    let rows = rows.as_array().ok_or("expected a JSON array")?;
    let row = |prefix: &str| {
        rows.iter()
            .find(|r| r["name"].as_str().is_some_and(|n| n == prefix))
            .ok_or_else(|| format!("no row named {prefix}"))
    };
    let tier2 = |r: &Value| -> Result<f64, String> {
        r["tiers"]
            .as_array()
            .and_then(|t| t.iter().find(|t| t["tier"] == "Tier 2"))
            .and_then(|t| t["budget"].as_f64())
            .ok_or_else(|| format!("no Tier 2 budget in {r}"))
    };
    let coherent = tier2(row("Coherent Scattering (XPCS, XSVS)")?)?;
    ensure((coherent - 8.8).abs() <= 1e-9, || {
        format!("coherent budget {coherent}")
    })?;
    let reduced = tier2(row("Liquid Scattering (reduced to 3 GB/s)")?)?;
    ensure((reduced - 4.0).abs() <= 1e-9, || {
        format!("reduced budget {reduced}")
    })?;
    let full = row("Liquid Scattering")?;
    ensure(full["infeasible"] == true, || {
        format!("4 GB/s row not infeasible: {full}")
    })
}

fn transfer_time_and_score() -> Check {
    let w = WorkloadSpec::new(0.5e9, 0.0).map_err(|e| e.to_string())?;
    let l = LinkSpec::new(GBPS_25, 1.0, 0.0).map_err(|e| e.to_string())?;
    let t = t_transfer(&w, &l).map_err(|e| e.to_string())?;
    ensure(close(t, 0.16, 1e-9), || format!("t_transfer {t}"))?;
    let a = sss(5.0, 0.16).map_err(|e| e.to_string())?;
    ensure(close(a, 31.25, 1e-9), || format!("sss(5, 0.16) = {a}"))?;
    let b = sss(0.2, 0.16).map_err(|e| e.to_string())?;
    ensure(close(b, 1.25, 1e-9), || format!("sss(0.2, 0.16) = {b}"))?;
    // the same number through the command line
    let v = bin_json(&[
        "--json", "model", "--size", "0.5GB", "--bw", "25Gbps", "--alpha", "1", "--theta", "1",
        "--work", "0FLOP",
    ])?;
    let cli = v["breakdown"]["t_transfer"].as_f64().unwrap_or(f64::NAN);
    ensure(close(cli, 0.16, 1e-9), || format!("cli t_transfer {cli}"))
}

fn scenario(mode: SpawnMode, concurrency: f64, startup: Option<f64>) -> Scenario {
    Scenario {
        link: LinkSpec::new(GBPS_25, 1.0, 0.016).unwrap(),
        duration: 10.0,
        concurrency,
        parallel_flows: 4,
        transfer_bytes: 500_000_000,
        mode,
        startup_latency: startup,
    }
}

fn equal_share() -> Check {
    let s = Scenario {
        duration: 1.0,
        ..scenario(SpawnMode::Simultaneous, 8.0, Some(0.0))
    };
    let r = fluidsim::simulate(&s).map_err(|e| e.to_string())?;
    ensure(r.records.len() == 8, || {
        format!("{} records", r.records.len())
    })?;
    for rec in &r.records {
        ensure(close(rec.fct_s, 1.28, 1e-12), || {
            format!("client {} fct {}", rec.client_id, rec.fct_s)
        })?;
    }
    for (i, &d) in r.delivered.iter().enumerate() {
        ensure(close(d, 5e8, 1e-6), || format!("client {i} delivered {d}"))?;
    }
    let cap = s.link.effective_rate();
    for seg in &r.segments {
        ensure(close(seg.allocated, cap, 1e-6), || {
            format!("segment {seg:?} allocates {}", seg.allocated)
        })?;
    }
    Ok(())
}

fn regimes() -> Check {
    let mut simultaneous = Vec::new();
    for c in 1..=8 {
        let r = fluidsim::simulate(&scenario(SpawnMode::Simultaneous, c as f64, None))
            .map_err(|e| e.to_string())?;
        simultaneous.push(r.max_fct);
    }
    ensure(simultaneous.windows(2).all(|w| w[1] >= w[0]), || {
        format!("not monotone: {simultaneous:?}")
    })?;
    let (w6, w8) = (simultaneous[5], simultaneous[7]);
    ensure(w8 >= 3.0 * w6, || {
        format!("worst(8) = {w8} < 3 x worst(6) = {w6}")
    })?;
    let bound = 2.0 * (0.16 + 0.016);
    for c in 1..=6 {
        let r = fluidsim::simulate(&scenario(SpawnMode::Scheduled, c as f64, None))
            .map_err(|e| e.to_string())?;
        ensure(r.max_fct <= bound, || {
            format!("scheduled c={c} worst {} > {bound}", r.max_fct)
        })?;
    }
    Ok(())
}

fn streaming_vs_file() -> Check {
    let link = LinkSpec::new(GBPS_25, 1.0, 0.0).unwrap();
    let scan = |files, overhead| ScanSpec {
        frame_bytes: 12.6e9 / 1440.0,
        frame_count: 1440,
        frame_interval: 0.033,
        files,
        per_file_overhead: overhead,
    };
    let mut last = f64::NEG_INFINITY;
    for files in [10, 144, 1440] {
        let r = file_vs_stream(&scan(files, 0.1), &link)
            .map_err(|e| e.to_string())?
            .reduction;
        ensure(r > last, || {
            format!("reduction {r} at {files} files does not exceed {last}")
        })?;
        last = r;
    }
    let best = [0.05, 0.1, 0.25, 0.5, 1.0]
        .into_iter()
        .map(|oh| file_vs_stream(&scan(1440, oh), &link).map(|r| (oh, r.reduction)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    ensure(best.iter().any(|&(_, r)| r >= 0.95), || {
        format!("no overhead <= 1 s reaches 0.95: {best:?}")
    })
}

fn free_port_run(pool: u16) -> Result<u16, String> {
    'base: for base in (41_000u16..60_000).step_by(97) {
        let mut held = Vec::new();
        for p in base..base + pool {
            match TcpListener::bind(("127.0.0.1", p)) {
                Ok(l) => held.push(l),
                Err(_) => continue 'base,
            }
        }
        return Ok(base);
    }
    Err("no free port range".into())
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn read_records(path: &std::path::Path) -> Result<Vec<FlowRecord>, String> {
    Ok(TransferLog::read_path(path)
        .map_err(|e| e.to_string())?
        .records)
}

fn loopback() -> Check {
    let pool = 4u16;
    let base = free_port_run(pool)?;
    let base_s = base.to_string();
    let pool_s = pool.to_string();
    let mut child = bin()
        .args([
            "measure",
            "serve",
            "--base-port",
            &base_s,
            "--pool-size",
            &pool_s,
            "--bind",
            "127.0.0.1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().ok_or("no server stdout")?;
    let _server = Killed(child);
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut line = String::new();
        let _ = BufReader::new(stdout).read_line(&mut line);
        let _ = tx.send(line);
    });
    let ready = rx
        .recv_timeout(Duration::from_secs(5))
        .map_err(|_| "server did not start")?;
    ensure(ready.starts_with("listening"), || {
        format!("server said {ready:?}")
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("run.jsonl");
    let out = bin()
        .args([
            "measure",
            "run",
            "--server",
            "127.0.0.1",
            "--base-port",
            &base_s,
            "--pool-size",
            &pool_s,
            "--concurrency",
            "4",
            "--duration",
            "3s",
            "--size",
            "10MB",
            "--parallel",
            "4",
            "--out",
        ])
        .arg(&log)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "run exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    let records = read_records(&log)?;
    let ok = records.iter().filter(|r| r.status == Status::Ok).count();
    ensure(records.len() == 12 && ok == 12, || {
        format!("{} records, {ok} ok", records.len())
    })?;
    for r in &records {
        ensure(r.bytes == 10_000_000 && r.flows == 4, || {
            format!("byte audit failed for {r:?}")
        })?;
        ensure(r.fct_s > 0.0, || format!("non-positive fct {r:?}"))?;
    }

    let sched = dir.path().join("sched.jsonl");
    let out = bin()
        .args([
            "measure",
            "run",
            "--server",
            "127.0.0.1",
            "--base-port",
            &base_s,
            "--pool-size",
            &pool_s,
            "--concurrency",
            "3",
            "--duration",
            "2s",
            "--size",
            "1MB",
            "--mode",
            "scheduled",
            "--out",
        ])
        .arg(&sched)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("scheduled run exited {:?}", out.status.code())
    })?;
    let records = read_records(&sched)?;
    ensure(records.len() == 6, || {
        format!("{} scheduled records", records.len())
    })?;
    for w in records.windows(2) {
        let gap = w[1].spawn_s - w[0].spawn_s;
        ensure((gap - 1.0 / 3.0).abs() <= 0.010, || {
            format!("spawn gap {gap}")
        })?;
    }
    Ok(())
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    })
}

fn records() -> impl Strategy<Value = Vec<FlowRecord>> {
    prop::collection::vec((0.0f64..10.0, 0.0f64..20.0, 0u8..10), 1..100).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (spawn, fct, roll))| {
                if roll == 0 {
                    FlowRecord::failed(i as u64, spawn, spawn + fct, 2, "reset")
                } else {
                    FlowRecord::ok(i as u64, spawn, spawn + fct, 1000, 2)
                }
            })
            .collect()
    })
}

fn fail<T: std::fmt::Debug>(name: &str, e: proptest::test_runner::TestError<T>) -> String {
    format!("{name}: {e}")
}

fn statistics_invariants() -> Check {
    runner()
        .run(&records(), |recs| {
            if let Ok(s) = analysis::summarize(&recs) {
                prop_assert!(s.p50 <= s.p90 && s.p90 <= s.p99 && s.p99 <= s.max);
                let c = analysis::cdf(&recs).unwrap();
                prop_assert_eq!(c.0.last().unwrap().cumulative_probability, 1.0);
                for w in c.0.windows(2) {
                    prop_assert!(w[0].fct_s < w[1].fct_s);
                    prop_assert!(w[0].cumulative_probability < w[1].cumulative_probability);
                }
            }
            Ok(())
        })
        .map_err(|e| fail("percentiles/cdf", e))?;

    runner()
        .run(&(1.0f64..1e3, 1e-6f64..1e4), |(theta, t)| {
            let back = io_overhead_theta((theta - 1.0) * t, t).unwrap().theta();
            prop_assert!((back - theta).abs() <= 1e-9 * theta);
            Ok(())
        })
        .map_err(|e| fail("theta round-trip", e))?;

    let params = (
        1e6f64..1e10,
        1e-1f64..1e4,
        1e8f64..1e10,
        0.01f64..0.99,
        1e12f64..1e15,
        1.0f64..10.0,
        1.01f64..4.0,
    );
    runner()
        .run(&params, |(size, cx, bw, alpha, remote, theta, k)| {
            let w = WorkloadSpec::new(size, cx).unwrap();
            let l = LinkSpec::new(bw, alpha, 0.0).unwrap();
            let c = ComputeSpec::new(1e12, remote).unwrap();
            let io = IoOverhead::new(theta).unwrap();
            let pct =
                |w: &WorkloadSpec, l: &LinkSpec, c: &ComputeSpec, io| t_pct(w, l, c, io).unwrap();
            let b = pct(&w, &l, &c, io);
            prop_assert!((b.t_pct - (b.t_transfer + b.t_io + b.t_remote)).abs() <= 1e-9 * b.t_pct);
            let faster_alpha = pct(
                &w,
                &LinkSpec {
                    alpha: (alpha * k).min(1.0),
                    ..l
                },
                &c,
                io,
            )
            .t_pct;
            let faster_link = pct(
                &w,
                &LinkSpec {
                    bandwidth: bw * k,
                    ..l
                },
                &c,
                io,
            )
            .t_pct;
            let faster_remote = pct(
                &w,
                &l,
                &ComputeSpec {
                    remote_rate: remote * k,
                    ..c
                },
                io,
            )
            .t_pct;
            let more_io = pct(&w, &l, &c, IoOverhead::new(theta * k).unwrap()).t_pct;
            let bigger = pct(
                &WorkloadSpec {
                    unit_size: size * k,
                    ..w
                },
                &l,
                &c,
                io,
            )
            .t_pct;
            let harder = pct(
                &WorkloadSpec {
                    complexity: cx * k,
                    ..w
                },
                &l,
                &c,
                io,
            )
            .t_pct;
            prop_assert!(faster_alpha < b.t_pct);
            prop_assert!(faster_link < b.t_pct);
            prop_assert!(faster_remote < b.t_pct);
            prop_assert!(more_io > b.t_pct);
            prop_assert!(bigger > b.t_pct);
            prop_assert!(harder > b.t_pct);
            Ok(())
        })
        .map_err(|e| fail("t_pct breakdown/monotonicity", e))?;

    runner()
        .run(
            &(
                1e6f64..1e11,
                0.0f64..1e5,
                1e10f64..1e15,
                1e10f64..1e16,
                1e-3f64..1e3,
            ),
            |(size, cx, local, remote, k)| {
                let l = LinkSpec::new(GBPS_25, 1.0, 0.0).unwrap();
                let c = ComputeSpec::new(local, remote).unwrap();
                let p = TierPolicy::default();
                let d = decide(
                    &WorkloadSpec::new(size, cx).unwrap(),
                    &l,
                    &c,
                    IoOverhead::STREAMING,
                    &p,
                    None,
                )
                .unwrap();
                // scaling both completion times by the same factor keeps the winner
                prop_assert_eq!(
                    prefer(d.t_local, d.breakdown.t_pct),
                    prefer(k * d.t_local, k * d.breakdown.t_pct)
                );
                let scaled = decide(
                    &WorkloadSpec::new(size * k, cx).unwrap(),
                    &l,
                    &c,
                    IoOverhead::STREAMING,
                    &p,
                    None,
                )
                .unwrap();
                if (d.gain - 1.0).abs() > 1e-9 {
                    prop_assert_eq!(d.choice, scaled.choice);
                }
                Ok(())
            },
        )
        .map_err(|e| fail("decision scale invariance", e))?;
    Ok(())
}

fn continuum_baseline() -> Check {
    runner()
        .run(
            &(0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0),
            |(a, b, c, d)| {
                let dd = DelayDecomposition {
                    d_proc: a,
                    d_queue: b,
                    d_trans: c,
                    d_prop: d,
                };
                prop_assert!(continuum_delay(&dd) <= delay_total(&dd));
                Ok(())
            },
        )
        .map_err(|e| format!("continuum <= total: {e}"))?;
    let s = scenario(SpawnMode::Simultaneous, 8.0, None);
    let r = fluidsim::simulate(&s).map_err(|e| e.to_string())?;
    let log = TransferLog {
        header: None,
        records: r.records,
    };
    let ctx = ReportContext {
        link: Some(s.link),
        ..Default::default()
    };
    let report = analysis::report(&log, &ctx).map_err(|e| e.to_string())?;
    let delay = report.delay.ok_or("report has no delay block")?;
    ensure(delay.continuum_label == "optimistic baseline", || {
        format!("label {:?}", delay.continuum_label)
    })?;
    ensure(delay.continuum_delay <= delay.delay_total, || {
        format!("{delay:?}")
    })
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 case-study budgets and infeasibility",
            Duration::from_secs(1),
            case_study,
        ),
        (
            "2 theoretical transfer time and speed score",
            Duration::from_secs(1),
            transfer_time_and_score,
        ),
        (
            "3 simulator equal-share oracle",
            Duration::from_secs(1),
            equal_share,
        ),
        (
            "4 congestion regimes in a simulated sweep",
            Duration::from_secs(5),
            regimes,
        ),
        (
            "5 streaming-vs-file reduction",
            Duration::from_secs(1),
            streaming_vs_file,
        ),
        ("6 loopback measurement", Duration::from_secs(10), loopback),
        (
            "7 statistics and model invariants",
            Duration::from_secs(30),
            statistics_invariants,
        ),
        (
            "8 continuum delay baseline",
            Duration::from_secs(1),
            continuum_baseline,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|()| {
            ensure(took <= limit, || {
                format!(
                    "took {:.2} s, limit {} s",
                    took.as_secs_f64(),
                    limit.as_secs()
                )
            })
        });
        match result {
            Ok(()) => println!("PASS  {name}  ({:.3} s)", took.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}  ({:.3} s): {e}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
