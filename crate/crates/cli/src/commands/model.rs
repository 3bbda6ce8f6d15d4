use std::fmt::Write;

use anyhow::{bail, Result};
use serde::Serialize;
use streamscore_core::model::{
    self, Choice, ComputeSpec, Decision, LinkSpec, TimeBreakdown, WorkloadSpec,
};

use super::{secs, Outcome, Output};
use crate::args::ModelArgs;

#[derive(Serialize)]
struct ModelReport {
    workload: WorkloadSpec,
    link: LinkSpec,
    theta: f64,
    breakdown: TimeBreakdown,
    t_theoretical: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_local: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sss: Option<f64>,
    tier: Option<String>,
    streamable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<Decision>,
}

pub fn run(a: &ModelArgs, out: &Output) -> Result<Outcome> {
    let link = LinkSpec::new(a.bw, a.alpha, 0.0)?;
    let mut workload = match (a.work, a.complexity) {
        (Some(work), _) => WorkloadSpec::from_work(a.size, work)?,
        (None, Some(cx)) => WorkloadSpec::new(a.size, cx)?,
        (None, None) => bail!("one of --work or --complexity is required"),
    };
    if let Some(i) = a.interval {
        workload = workload.with_interval(i)?;
    }
    let work = workload.work();

    let compute = match (a.local_rate, a.remote_rate) {
        (Some(l), Some(r)) => Some(ComputeSpec::new(l, r)?),
        _ if work > 0.0 => {
            bail!("--local-rate and --remote-rate are required when work is non-zero")
        }
        _ => None,
    };

    let breakdown = match &compute {
        Some(c) => model::t_pct(&workload, &link, c, a.theta)?,
        None => TimeBreakdown::compose(model::t_transfer(&workload, &link)?, 0.0, a.theta),
    };
    let t_theoretical = model::theoretical_transfer(a.size, a.bw)?;
    let sss = match a.worst {
        Some(w) => Some(model::sss(w, t_theoretical)?),
        None => None,
    };
    let decision = match &compute {
        Some(c) => Some(model::decide(
            &workload, &link, c, a.theta, &a.tiers, a.worst,
        )?),
        None => None,
    };
    let streamable = workload
        .sustained_rate()
        .is_none_or(|r| r <= link.effective_rate());
    let tier = match &decision {
        Some(d) => d.tier_achieved.clone(),
        None => model::classify_tier(breakdown.t_pct, &a.tiers).map(str::to_owned),
    };

    let report = ModelReport {
        workload,
        link,
        theta: a.theta.theta(),
        breakdown,
        t_theoretical,
        t_local: decision.as_ref().map(|d| d.t_local),
        sss,
        tier,
        streamable,
        decision,
    };
    out.save_json(&report)?;
    out.emit(&report, || human(&report, a.worst))?;

    let infeasible = !report.streamable
        || report
            .decision
            .as_ref()
            .is_some_and(|d| d.choice == Choice::Infeasible);
    Ok(if infeasible {
        Outcome::Infeasible
    } else {
        Outcome::Ok
    })
}

fn human(r: &ModelReport, worst: Option<f64>) -> String {
    let mut s = String::new();
    let b = &r.breakdown;
    let _ = writeln!(s, "t_transfer    {}", secs(b.t_transfer));
    let _ = writeln!(s, "t_io          {}", secs(b.t_io));
    let _ = writeln!(s, "t_remote      {}", secs(b.t_remote));
    let _ = writeln!(s, "t_pct         {}", secs(b.t_pct));
    if let Some(t) = r.t_local {
        let _ = writeln!(s, "t_local       {}", secs(t));
    }
    if let (Some(v), Some(w)) = (r.sss, worst) {
        let _ = writeln!(
            s,
            "sss           {v:.4} (worst {w} s over theoretical {:.6} s)",
            r.t_theoretical
        );
    }
    let _ = writeln!(s, "tier          {}", r.tier.as_deref().unwrap_or("none"));
    if !r.streamable {
        let _ = writeln!(s, "streamable    no, the source outpaces the link");
    }
    if let Some(d) = &r.decision {
        let choice = match d.choice {
            Choice::Local => "local",
            Choice::RemoteStream => "remote stream",
            Choice::Infeasible => "INFEASIBLE",
        };
        let _ = writeln!(
            s,
            "decision      {choice} (gain {:.3}): {}",
            d.gain, d.rationale
        );
    }
    s
}
