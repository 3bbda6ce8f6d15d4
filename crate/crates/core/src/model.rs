//! Completion-time model for local versus remote (streamed) processing.
//!
//! A workload is a data unit of `S` bytes that costs `C` FLOP per byte to
//! analyse. Processing it locally takes
//!
//! ```text
//! T_local = C·S / R_local
//! ```
//!
//! Shipping it to a remote HPC system costs the transfer, any file staging
//! on top of the transfer, and the remote compute:
//!
//! ```text
//! T_transfer = S / (α·Bw)
//! T_remote   = C·S / R_remote
//! θ          = (T_io + T_transfer) / T_transfer
//! T_pct      = θ·T_transfer + T_remote
//! ```
//!
//! `α` is the achieved fraction of raw link bandwidth and `θ ≥ 1` folds file
//! I/O into a multiplier on transfer time (`θ = 1` is pure memory-to-memory
//! streaming). All quantities are SI: bytes, bytes/s, seconds, FLOP, FLOP/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {v}")))
    }
}

fn rate(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(format!("{what} must be positive, got {v}")))
    }
}

/// One unit of instrument output and what it costs to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Bytes per data unit.
    pub unit_size: f64,
    /// FLOP per byte.
    pub complexity: f64,
    /// Seconds between consecutive data units, when the source is paced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<u64>,
}

impl WorkloadSpec {
    pub fn new(unit_size: f64, complexity: f64) -> Result<Self> {
        let w = WorkloadSpec {
            unit_size,
            complexity,
            generation_interval: None,
            frame_count: None,
        };
        w.validate()?;
        Ok(w)
    }

    /// Builds a workload from its total work per unit instead of FLOP/byte.
    pub fn from_work(unit_size: f64, work: f64) -> Result<Self> {
        non_negative("unit_size", unit_size)?;
        non_negative("work", work)?;
        let complexity = if work == 0.0 {
            0.0
        } else if unit_size == 0.0 {
            return Err(Error::invalid(
                "work",
                "non-zero work on an empty data unit",
            ));
        } else {
            work / unit_size
        };
        Self::new(unit_size, complexity)
    }

    pub fn with_interval(mut self, seconds: f64) -> Result<Self> {
        positive("generation_interval", seconds)?;
        self.generation_interval = Some(seconds);
        Ok(self)
    }

    pub fn with_frame_count(mut self, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("frame_count", "must be > 0"));
        }
        self.frame_count = Some(count);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("unit_size", self.unit_size)?;
        non_negative("complexity", self.complexity)?;
        if let Some(i) = self.generation_interval {
            positive("generation_interval", i)?;
        }
        if self.frame_count == Some(0) {
            return Err(Error::invalid("frame_count", "must be > 0"));
        }
        Ok(())
    }

    /// Total FLOP for one data unit.
    pub fn work(&self) -> f64 {
        self.complexity * self.unit_size
    }

    /// Sustained bytes/s the source produces, if paced.
    pub fn sustained_rate(&self) -> Option<f64> {
        self.generation_interval.map(|i| self.unit_size / i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeSpec {
    /// FLOP/s available at the instrument.
    pub local_rate: f64,
    /// FLOP/s available at the remote HPC system.
    pub remote_rate: f64,
}

impl ComputeSpec {
    pub fn new(local_rate: f64, remote_rate: f64) -> Result<Self> {
        positive("local_rate", local_rate)?;
        positive("remote_rate", remote_rate)?;
        Ok(ComputeSpec {
            local_rate,
            remote_rate,
        })
    }

    /// Remote-to-local processing ratio `r`.
    pub fn ratio(&self) -> f64 {
        self.remote_rate / self.local_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    /// Raw link bandwidth in bytes/s.
    #[serde(deserialize_with = "units::de::byte_rate")]
    pub bandwidth: f64,
    /// Achieved fraction of `bandwidth`, in (0, 1].
    pub alpha: f64,
    /// Round-trip time in seconds.
    #[serde(default, deserialize_with = "units::de::seconds")]
    pub rtt: f64,
}

impl LinkSpec {
    pub fn new(bandwidth: f64, alpha: f64, rtt: f64) -> Result<Self> {
        let l = LinkSpec {
            bandwidth,
            alpha,
            rtt,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        positive("bandwidth", self.bandwidth)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must be in (0, 1], got {}", self.alpha),
            ));
        }
        non_negative("rtt", self.rtt)
    }

    /// Bytes/s actually achieved: `α·Bw`.
    pub fn effective_rate(&self) -> f64 {
        self.alpha * self.bandwidth
    }
}

/// File I/O overhead coefficient, `θ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct IoOverhead(f64);

impl IoOverhead {
    /// No file staging: data goes memory to memory.
    pub const STREAMING: IoOverhead = IoOverhead(1.0);

    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta >= 1.0 {
            Ok(IoOverhead(theta))
        } else {
            Err(Error::invalid(
                "theta",
                format!("theta must be ≥ 1, got {theta}"),
            ))
        }
    }

    pub fn theta(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for IoOverhead {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        IoOverhead::new(v)
    }
}

impl From<IoOverhead> for f64 {
    fn from(io: IoOverhead) -> f64 {
        io.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub t_transfer: f64,
    pub t_remote: f64,
    pub t_io: f64,
    pub t_pct: f64,
}

impl TimeBreakdown {
    /// Assembles a breakdown from a transfer time, remote compute time and θ.
    pub fn compose(t_transfer: f64, t_remote: f64, io: IoOverhead) -> Self {
        let t_io = (io.theta() - 1.0) * t_transfer;
        TimeBreakdown {
            t_transfer,
            t_remote,
            t_io,
            t_pct: io.theta() * t_transfer + t_remote,
        }
    }
}

pub fn t_local(w: &WorkloadSpec, c: &ComputeSpec) -> Result<f64> {
    Ok(w.work() / rate("local_rate", c.local_rate)?)
}

pub fn t_transfer(w: &WorkloadSpec, l: &LinkSpec) -> Result<f64> {
    Ok(w.unit_size / rate("effective transfer rate", l.effective_rate())?)
}

pub fn t_remote(w: &WorkloadSpec, c: &ComputeSpec) -> Result<f64> {
    Ok(w.work() / rate("remote_rate", c.remote_rate)?)
}

pub fn t_pct(
    w: &WorkloadSpec,
    l: &LinkSpec,
    c: &ComputeSpec,
    io: IoOverhead,
) -> Result<TimeBreakdown> {
    Ok(TimeBreakdown::compose(
        t_transfer(w, l)?,
        t_remote(w, c)?,
        io,
    ))
}

/// Recovers θ from a measured staging time and transfer time.
pub fn io_overhead_theta(t_io: f64, t_transfer: f64) -> Result<IoOverhead> {
    if !(t_transfer.is_finite() && t_transfer > 0.0) {
        return Err(Error::domain(format!(
            "t_transfer must be positive, got {t_transfer}"
        )));
    }
    if !(t_io.is_finite() && t_io >= 0.0) {
        return Err(Error::invalid("t_io", format!("must be >= 0, got {t_io}")));
    }
    IoOverhead::new((t_io + t_transfer) / t_transfer)
}

/// Transmission-only transfer time: `bytes / bandwidth`.
pub fn theoretical_transfer(bytes: f64, bandwidth: f64) -> Result<f64> {
    Ok(bytes / rate("bandwidth", bandwidth)?)
}

/// Streaming speed score: worst observed transfer time over the
/// transmission-only minimum. 1.0 is an ideal network.
pub fn sss(t_worst: f64, t_theoretical: f64) -> Result<f64> {
    if !(t_worst.is_finite() && t_worst > 0.0) {
        return Err(Error::domain(format!(
            "t_worst must be positive, got {t_worst}"
        )));
    }
    if !(t_theoretical.is_finite() && t_theoretical > 0.0) {
        return Err(Error::domain(format!(
            "t_theoretical must be positive, got {t_theoretical}"
        )));
    }
    Ok(t_worst / t_theoretical)
}

/// Compute time left inside a deadline once the worst-case transfer is paid.
/// Zero means nothing is left.
pub fn transfer_budget(deadline: f64, t_worst_transfer: f64) -> f64 {
    (deadline - t_worst_transfer).max(0.0)
}

/// Minimum remote FLOP/s that finishes one unit inside `budget`.
pub fn required_remote_rate(w: &WorkloadSpec, budget: f64) -> Result<f64> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::domain(format!(
            "no compute budget left ({budget} s)"
        )));
    }
    Ok(w.work() / budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    #[serde(deserialize_with = "units::de::seconds")]
    pub deadline: f64,
}

/// Ordered completion-time deadlines, most stringent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Tier>", into = "Vec<Tier>")]
pub struct TierPolicy {
    tiers: Vec<Tier>,
}

impl TierPolicy {
    pub fn new(tiers: Vec<Tier>) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::invalid("tiers", "policy needs at least one tier"));
        }
        for t in &tiers {
            positive("tier deadline", t.deadline)?;
        }
        if tiers.windows(2).any(|w| w[1].deadline <= w[0].deadline) {
            return Err(Error::invalid(
                "tiers",
                "deadlines must be strictly increasing",
            ));
        }
        Ok(TierPolicy { tiers })
    }

    /// Names tiers "Tier 1", "Tier 2", ... in order.
    pub fn from_deadlines(deadlines: &[f64]) -> Result<Self> {
        Self::new(
            deadlines
                .iter()
                .enumerate()
                .map(|(i, &d)| Tier {
                    name: format!("Tier {}", i + 1),
                    deadline: d,
                })
                .collect(),
        )
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    /// Index of the first tier whose deadline strictly exceeds `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.tiers.iter().position(|tier| t < tier.deadline)
    }
}

impl Default for TierPolicy {
    fn default() -> Self {
        TierPolicy {
            tiers: vec![
                Tier {
                    name: "Tier 1".into(),
                    deadline: 1.0,
                },
                Tier {
                    name: "Tier 2".into(),
                    deadline: 10.0,
                },
                Tier {
                    name: "Tier 3".into(),
                    deadline: 60.0,
                },
            ],
        }
    }
}

impl TryFrom<Vec<Tier>> for TierPolicy {
    type Error = Error;
    fn try_from(v: Vec<Tier>) -> Result<Self> {
        TierPolicy::new(v)
    }
}

impl From<TierPolicy> for Vec<Tier> {
    fn from(p: TierPolicy) -> Self {
        p.tiers
    }
}

pub fn classify_tier(t: f64, p: &TierPolicy) -> Option<&str> {
    p.index_of(t).map(|i| p.tiers[i].name.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Local,
    RemoteStream,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub choice: Choice,
    /// `T_local / T_pct`; above 1 favours streaming.
    pub gain: f64,
    pub t_local: f64,
    pub breakdown: TimeBreakdown,
    pub tier_achieved: Option<String>,
    pub rationale: String,
}

/// Ratio of local to remote completion time. Equal times (including both
/// zero) give 1.
pub fn gain(t_local: f64, t_pct: f64) -> f64 {
    if t_local == t_pct {
        1.0
    } else {
        t_local / t_pct
    }
}

/// Local wins ties: no network dependency at equal cost.
pub fn prefer(t_local: f64, t_pct: f64) -> Choice {
    if t_local <= t_pct {
        Choice::Local
    } else {
        Choice::RemoteStream
    }
}

/// Chooses between local processing and streaming to the remote system.
///
/// When `worst_case_transfer` is given it replaces the model's `T_transfer`,
/// so the decision is taken against measured tail behaviour rather than the
/// mean-rate model. A paced source whose sustained rate exceeds `α·Bw` can
/// never be streamed and yields [`Choice::Infeasible`].
pub fn decide(
    w: &WorkloadSpec,
    l: &LinkSpec,
    c: &ComputeSpec,
    io: IoOverhead,
    p: &TierPolicy,
    worst_case_transfer: Option<f64>,
) -> Result<Decision> {
    let local = t_local(w, c)?;
    let transfer = match worst_case_transfer {
        Some(t) => {
            non_negative("worst_case_transfer", t)?;
            t
        }
        None => t_transfer(w, l)?,
    };
    let breakdown = TimeBreakdown::compose(transfer, t_remote(w, c)?, io);
    let g = gain(local, breakdown.t_pct);

    if let Some(needed) = w.sustained_rate() {
        let capacity = l.effective_rate();
        if needed > capacity {
            return Ok(Decision {
                choice: Choice::Infeasible,
                gain: g,
                t_local: local,
                breakdown,
                tier_achieved: None,
                rationale: format!(
                    "source needs {:.3} Gbps sustained but the link carries {:.3} Gbps; \
                     streaming cannot keep up, local processing takes {local:.3} s",
                    needed * 8e-9,
                    capacity * 8e-9
                ),
            });
        }
    }

    let choice = prefer(local, breakdown.t_pct);
    let chosen_time = match choice {
        Choice::Local => local,
        _ => breakdown.t_pct,
    };
    let tier = classify_tier(chosen_time, p).map(str::to_owned);
    let rationale = match choice {
        Choice::Local => format!(
            "local processing ({local:.3} s) is no slower than remote ({:.3} s)",
            breakdown.t_pct
        ),
        _ => format!(
            "remote processing ({:.3} s) beats local ({local:.3} s) by {g:.3}x",
            breakdown.t_pct
        ),
    };
    Ok(Decision {
        choice,
        gain: g,
        t_local: local,
        breakdown,
        tier_achieved: tier,
        rationale,
    })
}

/// Per-packet delay components, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayDecomposition {
    pub d_proc: f64,
    pub d_queue: f64,
    pub d_trans: f64,
    pub d_prop: f64,
}

impl DelayDecomposition {
    pub fn validate(&self) -> Result<()> {
        non_negative("d_proc", self.d_proc)?;
        non_negative("d_queue", self.d_queue)?;
        non_negative("d_trans", self.d_trans)?;
        non_negative("d_prop", self.d_prop)
    }
}

pub fn delay_total(d: &DelayDecomposition) -> f64 {
    d.d_proc + d.d_queue + d.d_trans + d.d_prop
}

/// Propagation-only delay. Assumes queues, processing and transmission
/// vanish, so it is an optimistic lower bound on [`delay_total`].
pub fn continuum_delay(d: &DelayDecomposition) -> f64 {
    d.d_prop
}

pub const OPTIMISTIC_BASELINE: &str = "optimistic baseline";

/// A detector scan: frames produced at a fixed pace and either streamed as
/// they appear or written into `files` files and shipped afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub frame_bytes: f64,
    pub frame_count: u64,
    /// Seconds between frames.
    pub frame_interval: f64,
    pub files: u64,
    /// Fixed staging/metadata cost per file, seconds.
    pub per_file_overhead: f64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        positive("frame_bytes", self.frame_bytes)?;
        positive("frame_interval", self.frame_interval)?;
        non_negative("per_file_overhead", self.per_file_overhead)?;
        if self.frame_count == 0 {
            return Err(Error::invalid("frame_count", "must be > 0"));
        }
        if self.files == 0 || self.files > self.frame_count {
            return Err(Error::invalid(
                "files",
                format!("must be in 1..={}, got {}", self.frame_count, self.files),
            ));
        }
        Ok(())
    }

    pub fn total_bytes(&self) -> f64 {
        self.frame_bytes * self.frame_count as f64
    }

    pub fn generation_time(&self) -> f64 {
        self.frame_interval * self.frame_count as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileVsStream {
    pub t_stream: f64,
    pub t_file: f64,
    /// `1 − t_stream / t_file`.
    pub reduction: f64,
}

/// Completion time of a scan streamed frame-by-frame versus staged as files.
///
/// Streaming overlaps transmission with generation. Frame `k` is ready at
/// `(k+1)·interval` and the link drains frames in order, so the last byte
/// lands at `max(generation + one frame, first frame + all bytes)`.
///
/// The file path serialises: the scan must finish, every file pays its
/// staging overhead, then the bytes move.
pub fn file_vs_stream(s: &ScanSpec, l: &LinkSpec) -> Result<FileVsStream> {
    s.validate()?;
    let link = rate("effective transfer rate", l.effective_rate())?;
    let generation = s.generation_time();
    let all_bytes = s.total_bytes() / link;
    let one_frame = s.frame_bytes / link;

    let t_stream = (generation + one_frame).max(s.frame_interval + all_bytes);
    let t_file = generation + s.files as f64 * s.per_file_overhead + all_bytes;
    Ok(FileVsStream {
        t_stream,
        t_file,
        reduction: 1.0 - t_stream / t_file,
    })
}
