use std::fmt::Write;

use anyhow::{Context, Result};
use streamscore_core::analysis::{self, Comparison, DecisionInputs, Report, ReportContext};
use streamscore_core::model::{Choice, ComputeSpec, LinkSpec, ScanSpec, WorkloadSpec};
use streamscore_core::record::TransferLog;

use super::{read_text, Outcome, Output};
use crate::args::AnalyzeArgs;

fn load(path: &std::path::Path) -> Result<TransferLog> {
    TransferLog::read_path(path).with_context(|| format!("reading {}", path.display()))
}

pub fn run(a: &AnalyzeArgs, out: &Output) -> Result<Outcome> {
    let log = load(&a.input)?;
    let link = a
        .link_bw
        .map(|bw| LinkSpec::new(bw, a.alpha, a.rtt))
        .transpose()?;

    let decision = match (a.local_rate, a.remote_rate) {
        (Some(local), Some(remote)) => {
            // the data unit is one client transfer
            let unit = log.successful().map(|r| r.bytes).max().unwrap_or(0) as f64;
            let workload = match (a.work, a.complexity) {
                (Some(w), _) => WorkloadSpec::from_work(unit, w)?,
                (None, Some(cx)) => WorkloadSpec::new(unit, cx)?,
                (None, None) => anyhow::bail!("a decision needs --work or --complexity"),
            };
            Some(DecisionInputs {
                workload,
                compute: ComputeSpec::new(local, remote)?,
                io: a.theta,
            })
        }
        _ => None,
    };
    let scan: Option<ScanSpec> = match &a.scan {
        Some(p) => Some(
            serde_json::from_str(&read_text(p)?)
                .with_context(|| format!("parsing {}", p.display()))?,
        ),
        None => None,
    };
    let other = match &a.compare {
        Some(p) => Some((p.display().to_string(), load(p)?)),
        None => None,
    };

    let ctx = ReportContext {
        label: Some(a.input.display().to_string()),
        link,
        policy: a.tiers.clone(),
        decision,
        other,
        scan,
    };
    let report = analysis::report(&log, &ctx)?;
    if let Some(dir) = &out.path {
        analysis::write_report_dir(dir, &report)
            .with_context(|| format!("writing {}", dir.display()))?;
    }
    out.emit(&report, || human(&report))?;

    let infeasible = report
        .decision
        .as_ref()
        .is_some_and(|d| d.choice == Choice::Infeasible);
    Ok(if infeasible {
        Outcome::Infeasible
    } else {
        Outcome::Ok
    })
}

fn human(r: &Report) -> String {
    let mut s = String::new();
    let st = &r.stats;
    let _ = writeln!(s, "transfers     {} ok, {} failed", st.count, st.failures);
    let _ = writeln!(s, "fct min/mean  {:.6} / {:.6} s", st.min, st.mean);
    let _ = writeln!(s, "fct p50/p90   {:.6} / {:.6} s", st.p50, st.p90);
    let _ = writeln!(s, "fct p99/max   {:.6} / {:.6} s", st.p99, st.max);
    if let Some(v) = r.sss {
        let _ = writeln!(s, "sss           {v:.4}");
    }
    if let Some(u) = r.regime.utilization {
        let _ = writeln!(s, "utilization   {u:.3}");
    }
    let _ = writeln!(s, "regime        {:?}", r.regime.regime);
    for t in &r.regime.tier_feasibility {
        let verdict = if t.feasible { "met" } else { "missed" };
        let _ = writeln!(s, "  {} ({} s): {verdict}", t.name, t.deadline);
    }
    if let Some(d) = &r.delay {
        let _ = writeln!(
            s,
            "delay         {:.6} s total, {:.6} s {}",
            d.delay_total, d.continuum_delay, d.continuum_label
        );
    }
    if let Some(d) = &r.decision {
        let _ = writeln!(s, "decision      {:?}: {}", d.choice, d.rationale);
    }
    for c in &r.comparison {
        match c {
            Comparison::Runs {
                other_label,
                ratios,
                ..
            } => {
                let _ = writeln!(
                    s,
                    "vs {other_label}: max x{:.3}, p99 x{:.3}, p50 x{:.3}",
                    ratios.max, ratios.p99, ratios.p50
                );
            }
            Comparison::FileVsStream { result, .. } => {
                let _ = writeln!(
                    s,
                    "stream {:.3} s vs file {:.3} s: {:.1}% shorter",
                    result.t_stream,
                    result.t_file,
                    result.reduction * 100.0
                );
            }
        }
    }
    s
}
