//! Tail statistics and reports over flow-record logs.
//!
//! Works the same on measured and simulated logs. Failed transfers never
//! enter the FCT statistics; they are counted separately.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluidsim::SweepRow;
use crate::model::{
    self, ComputeSpec, Decision, DelayDecomposition, FileVsStream, IoOverhead, LinkSpec, ScanSpec,
    TierPolicy, WorkloadSpec,
};
use crate::record::{FlowRecord, TransferLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FctStats {
    pub count: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `⌈p/100 · n⌉`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn sorted_fcts(records: &[FlowRecord]) -> Vec<f64> {
    let mut v: Vec<f64> = records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| r.fct_s)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(records: &[FlowRecord]) -> Result<FctStats> {
    let fcts = sorted_fcts(records);
    if fcts.is_empty() {
        return Err(Error::NoRecords);
    }
    let n = fcts.len();
    let failures = records.len() - n;
    let (min, max) = (fcts[0], fcts[n - 1]);
    let mean = (fcts.iter().sum::<f64>() / n as f64).clamp(min, max);
    Ok(FctStats {
        count: n,
        failures,
        failure_rate: failures as f64 / records.len() as f64,
        min,
        max,
        mean,
        p50: nearest_rank(&fcts, 50.0),
        p90: nearest_rank(&fcts, 90.0),
        p99: nearest_rank(&fcts, 99.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub fct_s: f64,
    pub cumulative_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CdfSeries(pub Vec<CdfPoint>);

/// Empirical CDF. Equal values collapse onto their highest rank so
/// probabilities strictly increase and end at 1.
pub fn cdf(records: &[FlowRecord]) -> Result<CdfSeries> {
    let fcts = sorted_fcts(records);
    if fcts.is_empty() {
        return Err(Error::NoRecords);
    }
    let n = fcts.len();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, &x) in fcts.iter().enumerate() {
        let p = if i + 1 == n {
            1.0
        } else {
            (i + 1) as f64 / n as f64
        };
        match points.last_mut() {
            Some(last) if last.fct_s == x => last.cumulative_probability = p,
            _ => points.push(CdfPoint {
                fct_s: x,
                cumulative_probability: p,
            }),
        }
    }
    Ok(CdfSeries(points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Low,
    Moderate,
    Severe,
}

/// Low below the first tier deadline, Severe at or beyond the second,
/// Moderate in between. A single-tier policy has no Moderate band.
pub fn classify_regime(worst_fct: f64, policy: &TierPolicy) -> Regime {
    let tiers = policy.tiers();
    let low = tiers[0].deadline;
    let severe = tiers.get(1).map_or(low, |t| t.deadline);
    if worst_fct < low {
        Regime::Low
    } else if worst_fct >= severe {
        Regime::Severe
    } else {
        Regime::Moderate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCheck {
    pub name: String,
    pub deadline: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub worst_fct: f64,
    pub utilization: Option<f64>,
    pub sss: Option<f64>,
    pub tier_feasibility: Vec<TierCheck>,
}

pub fn regime_report(
    worst_fct: f64,
    utilization: Option<f64>,
    sss: Option<f64>,
    policy: &TierPolicy,
) -> RegimeReport {
    RegimeReport {
        regime: classify_regime(worst_fct, policy),
        worst_fct,
        utilization,
        sss,
        tier_feasibility: policy
            .tiers()
            .iter()
            .map(|t| TierCheck {
                name: t.name.clone(),
                deadline: t.deadline,
                feasible: worst_fct < t.deadline,
            })
            .collect(),
    }
}

/// Delivered bytes inside `[t0, t0 + window]` over what the link could have
/// carried, where `t0` is the earliest spawn. A transfer only partly inside
/// the window contributes pro rata. Results above 1 are clamped.
pub fn utilization(records: &[FlowRecord], link: &LinkSpec, window: f64) -> f64 {
    let ok: Vec<&FlowRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() || window.is_nan() || window <= 0.0 {
        return 0.0;
    }
    let t0 = ok.iter().map(|r| r.spawn_s).fold(f64::INFINITY, f64::min);
    let t1 = t0 + window;
    let bytes: f64 = ok
        .iter()
        .map(|r| {
            let span = r.complete_s - r.spawn_s;
            if span <= 0.0 {
                return if r.complete_s <= t1 {
                    r.bytes as f64
                } else {
                    0.0
                };
            }
            let overlap = (r.complete_s.min(t1) - r.spawn_s.max(t0)).max(0.0);
            r.bytes as f64 * overlap / span
        })
        .sum();
    let u = bytes / (link.bandwidth * window);
    if u > 1.0 {
        tracing::warn!(
            utilization = u,
            "delivered bytes exceed link capacity; clamping to 1"
        );
        1.0
    } else {
        u
    }
}

/// Time from the earliest spawn to the last completion.
pub fn busy_span(records: &[FlowRecord]) -> f64 {
    let ok = records.iter().filter(|r| r.is_ok());
    let t0 = ok.clone().map(|r| r.spawn_s).fold(f64::INFINITY, f64::min);
    let t1 = ok.map(|r| r.complete_s).fold(f64::NEG_INFINITY, f64::max);
    if t1 > t0 {
        t1 - t0
    } else {
        0.0
    }
}

/// The worst flow split into per-packet delay terms, next to the
/// propagation-only figure that ignores queueing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub decomposition: DelayDecomposition,
    pub delay_total: f64,
    pub continuum_delay: f64,
    pub continuum_label: String,
}

pub fn delay_report(worst_fct: f64, bytes: f64, link: &LinkSpec) -> Result<DelayReport> {
    let d_trans = model::theoretical_transfer(bytes, link.bandwidth)?;
    let d_prop = link.rtt / 2.0;
    let decomposition = DelayDecomposition {
        d_proc: 0.0,
        d_queue: (worst_fct - d_trans - d_prop).max(0.0),
        d_trans,
        d_prop,
    };
    Ok(DelayReport {
        delay_total: model::delay_total(&decomposition),
        continuum_delay: model::continuum_delay(&decomposition),
        continuum_label: model::OPTIMISTIC_BASELINE.to_string(),
        decomposition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatRatios {
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl StatRatios {
    pub fn of(a: &FctStats, b: &FctStats) -> Self {
        StatRatios {
            max: a.max / b.max,
            mean: a.mean / b.mean,
            p50: a.p50 / b.p50,
            p90: a.p90 / b.p90,
            p99: a.p99 / b.p99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    /// `ratios` is this run over the other run, stat by stat.
    Runs {
        label: String,
        other_label: String,
        this: FctStats,
        other: FctStats,
        ratios: StatRatios,
    },
    FileVsStream {
        scan: ScanSpec,
        result: FileVsStream,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionInputs {
    pub workload: WorkloadSpec,
    pub compute: ComputeSpec,
    pub io: IoOverhead,
}

#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub label: Option<String>,
    pub link: Option<LinkSpec>,
    pub policy: TierPolicy,
    pub decision: Option<DecisionInputs>,
    pub other: Option<(String, TransferLog)>,
    pub scan: Option<ScanSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub stats: FctStats,
    pub cdf: CdfSeries,
    pub regime: RegimeReport,
    pub sss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelayReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default)]
    pub comparison: Vec<Comparison>,
    /// The records the report was computed from.
    pub inputs: Vec<FlowRecord>,
}

pub fn report(log: &TransferLog, ctx: &ReportContext) -> Result<Report> {
    let stats = summarize(&log.records)?;
    let series = cdf(&log.records)?;
    let worst_record = log
        .successful()
        .max_by(|a, b| a.fct_s.total_cmp(&b.fct_s))
        .ok_or(Error::NoRecords)?;
    let worst = worst_record.fct_s;

    let mut sss = None;
    let mut util = None;
    let mut delay = None;
    let mut decision = None;
    if let Some(link) = &ctx.link {
        link.validate()?;
        let theoretical = model::theoretical_transfer(worst_record.bytes as f64, link.bandwidth)?;
        if worst > 0.0 && theoretical > 0.0 {
            sss = Some(model::sss(worst, theoretical)?);
        }
        let span = busy_span(&log.records);
        if span > 0.0 {
            util = Some(utilization(&log.records, link, span));
        }
        delay = Some(delay_report(worst, worst_record.bytes as f64, link)?);
        if let Some(d) = &ctx.decision {
            decision = Some(model::decide(
                &d.workload,
                link,
                &d.compute,
                d.io,
                &ctx.policy,
                Some(worst),
            )?);
        }
    }

    let mut comparison = Vec::new();
    if let Some((other_label, other)) = &ctx.other {
        let other_stats = summarize(&other.records)?;
        comparison.push(Comparison::Runs {
            label: ctx.label.clone().unwrap_or_else(|| "this".into()),
            other_label: other_label.clone(),
            ratios: StatRatios::of(&stats, &other_stats),
            this: stats,
            other: other_stats,
        });
    }
    if let Some(scan) = &ctx.scan {
        let link = ctx
            .link
            .as_ref()
            .ok_or_else(|| Error::invalid("scan", "file-vs-stream comparison needs a link"))?;
        comparison.push(Comparison::FileVsStream {
            scan: *scan,
            result: model::file_vs_stream(scan, link)?,
        });
    }

    Ok(Report {
        stats,
        regime: regime_report(worst, util, sss, &ctx.policy),
        cdf: series,
        sss,
        delay,
        decision,
        comparison,
        inputs: log.records.clone(),
    })
}

#[derive(Serialize)]
struct SweepCsvRow {
    offered_load: f64,
    mode: String,
    concurrency: f64,
    parallel_flows: u32,
    worst_fct_s: f64,
    sss: f64,
    utilization: f64,
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(SweepCsvRow {
            offered_load: r.offered_load,
            mode: r.mode.to_string(),
            concurrency: r.concurrency,
            parallel_flows: r.parallel_flows,
            worst_fct_s: r.worst_fct,
            sss: r.sss,
            utilization: r.utilization,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_cdf_csv<W: Write>(w: W, series: &CdfSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &series.0 {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

pub const REPORT_FILE: &str = "report.json";
pub const CDF_SERIES_FILE: &str = "series_cdf.csv";
pub const SWEEP_SERIES_FILE: &str = "series_worst_fct_vs_load.csv";

/// Writes `report.json` and `series_cdf.csv` into `dir`, creating it.
pub fn write_report_dir(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join(REPORT_FILE))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), report)?;
    let f = std::fs::File::create(dir.join(CDF_SERIES_FILE))?;
    write_cdf_csv(std::io::BufWriter::new(f), &report.cdf)
}
