use std::fmt::Write;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use streamscore_core::analysis::{self, Comparison, StatRatios};
use streamscore_core::fluidsim::{self, Scenario, SpawnMode, SweepRow};
use streamscore_core::model::{self, LinkSpec};
use streamscore_core::record::{unix_ms_now, RunHeader, TransferLog};
use streamscore_core::units;

use super::{read_text, Outcome, Output};
use crate::args::{self, SimulateArgs};

#[derive(Serialize)]
struct Summary {
    records: usize,
    offered_load: f64,
    utilization: f64,
    max_fct: f64,
    sss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn list<T>(raw: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| parse(s.trim()).map_err(anyhow::Error::msg))
        .collect()
}

fn parallel(s: &str) -> Result<u32, String> {
    s.parse().map_err(|e| format!("parallel flows {s:?}: {e}"))
}

fn single<T: Copy>(name: &str, values: &[T]) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("--{name} takes one value unless --sweep is given"),
    }
}

/// The scenario from `--config` (if any) with flags applied on top.
fn base_scenario(a: &SimulateArgs) -> Result<Scenario> {
    let mut s = match &a.config {
        Some(path) => Scenario::from_file_str(&read_text(path)?)
            .with_context(|| format!("scenario file {}", path.display()))?,
        None => {
            let mut missing = Vec::new();
            for (flag, given) in [
                ("--bw", a.bw.is_some()),
                ("--duration", a.duration.is_some()),
                ("--concurrency", a.concurrency.is_some()),
                ("--size", a.size.is_some()),
            ] {
                if !given {
                    missing.push(flag);
                }
            }
            if !missing.is_empty() {
                bail!("missing {} (or pass --config)", missing.join(", "));
            }
            Scenario {
                link: LinkSpec::new(a.bw.unwrap(), 1.0, 0.016)?,
                duration: 0.0,
                concurrency: 0.0,
                parallel_flows: 1,
                transfer_bytes: 0,
                mode: SpawnMode::Simultaneous,
                startup_latency: None,
            }
        }
    };
    if let Some(v) = a.bw {
        s.link.bandwidth = v;
    }
    if let Some(v) = a.alpha {
        s.link.alpha = v;
    }
    if let Some(v) = a.rtt {
        s.link.rtt = v;
    }
    if let Some(v) = a.startup {
        s.startup_latency = Some(v);
    }
    if let Some(v) = a.duration {
        s.duration = v;
    }
    if let Some(v) = a.size {
        s.transfer_bytes = v;
    }
    Ok(s)
}

pub fn run(a: &SimulateArgs, out: &Output) -> Result<Outcome> {
    let mut base = base_scenario(a)?;
    let concurrency = match &a.concurrency {
        Some(raw) => list(raw, |s| units::scalar(s).map_err(|e| e.to_string()))?,
        None => vec![base.concurrency],
    };
    let parallel_flows = match &a.parallel {
        Some(raw) => list(raw, parallel)?,
        None => vec![base.parallel_flows],
    };
    let modes = match &a.mode {
        Some(raw) => list(raw, args::mode)?,
        None => vec![base.mode],
    };

    if a.sweep {
        if a.compare.is_some() {
            bail!("--compare applies to a single run, not a sweep");
        }
        base.concurrency = concurrency[0];
        base.parallel_flows = parallel_flows[0];
        let mut rows = Vec::new();
        for mode in modes {
            base.mode = mode;
            base.validate()?;
            rows.extend(fluidsim::sweep(&base, &concurrency, &parallel_flows)?);
        }
        if let Some(dir) = &out.path {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(analysis::SWEEP_SERIES_FILE);
            let f = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            analysis::write_sweep_csv(std::io::BufWriter::new(f), &rows)?;
        }
        out.emit(&rows, || sweep_table(&rows))?;
        return Ok(Outcome::Ok);
    }

    base.concurrency = single("concurrency", &concurrency)?;
    base.parallel_flows = single("parallel", &parallel_flows)?;
    base.mode = single("mode", &modes)?;
    let result = fluidsim::simulate(&base)?;
    let log = TransferLog {
        header: Some(RunHeader::new(&base, unix_ms_now())?),
        records: result.records,
    };
    if let Some(p) = &out.path {
        log.write_path(p)
            .with_context(|| format!("writing {}", p.display()))?;
    }

    let comparison = match &a.compare {
        Some(path) => {
            let measured = TransferLog::read_path(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let this = analysis::summarize(&log.records)?;
            let other = analysis::summarize(&measured.records)
                .with_context(|| format!("summarizing {}", path.display()))?;
            Some(Comparison::Runs {
                label: "simulated".into(),
                other_label: path.display().to_string(),
                ratios: StatRatios::of(&this, &other),
                this,
                other,
            })
        }
        None => None,
    };

    let theoretical = model::theoretical_transfer(base.transfer_bytes as f64, base.link.bandwidth)?;
    let summary = Summary {
        records: log.records.len(),
        offered_load: base.offered_load(),
        utilization: result.utilization,
        max_fct: result.max_fct,
        sss: model::sss(result.max_fct, theoretical)?,
        comparison,
    };
    out.emit(&summary, || {
        let mut s = String::new();
        let _ = writeln!(s, "records       {}", summary.records);
        let _ = writeln!(s, "offered load  {:.3}", summary.offered_load);
        let _ = writeln!(s, "utilization   {:.3}", summary.utilization);
        let _ = writeln!(s, "max fct       {:.6} s", summary.max_fct);
        let _ = writeln!(s, "sss           {:.4}", summary.sss);
        if let Some(Comparison::Runs {
            other_label,
            ratios,
            ..
        }) = &summary.comparison
        {
            let _ = writeln!(
                s,
                "vs {other_label}: max x{:.3}, p99 x{:.3}, p50 x{:.3}",
                ratios.max, ratios.p99, ratios.p50
            );
        }
        s
    })?;
    Ok(Outcome::Ok)
}

fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>13} {:>11} {:>8} {:>12} {:>9} {:>11}",
        "load", "mode", "clients/s", "flows", "worst fct s", "sss", "utilization"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>8.3} {:>13} {:>11} {:>8} {:>12.4} {:>9.3} {:>11.3}",
            r.offered_load,
            r.mode.to_string(),
            r.concurrency,
            r.parallel_flows,
            r.worst_fct,
            r.sss,
            r.utilization
        );
    }
    s
}
