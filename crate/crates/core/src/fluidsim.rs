//! Fluid simulation of transfer clients sharing one bottleneck link.
//!
//! Capacity is split equally among clients that are moving data. Between
//! events (a client starting to send, a client finishing) every active
//! client drains its residual bytes linearly at its share, so the whole run
//! is a short sequence of constant-rate segments and completion times come
//! out in closed form. There is no packet or TCP model: a client's parallel
//! flows share the client's allocation and only count toward connection
//! setup, which is paid once per client.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, LinkSpec};
use crate::record::FlowRecord;
use crate::units::{self, Dimension};

/// Completions closer than this (seconds) are treated as simultaneous.
const EVENT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnMode {
    /// `⌈concurrency⌉` clients launched together at every whole second.
    Simultaneous,
    /// Clients launched `1/concurrency` seconds apart.
    Scheduled,
}

impl fmt::Display for SpawnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpawnMode::Simultaneous => "simultaneous",
            SpawnMode::Scheduled => "scheduled",
        })
    }
}

impl FromStr for SpawnMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "simultaneous" => Ok(SpawnMode::Simultaneous),
            "scheduled" => Ok(SpawnMode::Scheduled),
            other => Err(Error::invalid(
                "mode",
                format!("expected simultaneous|scheduled, got {other:?}"),
            )),
        }
    }
}

/// Client launch times for a run of `duration` seconds.
pub fn spawn_schedule(mode: SpawnMode, duration: f64, concurrency: f64) -> Vec<f64> {
    let mut times = Vec::new();
    match mode {
        SpawnMode::Simultaneous => {
            let per_batch = concurrency.ceil() as usize;
            let mut k = 0u64;
            while (k as f64) < duration {
                times.extend(std::iter::repeat_n(k as f64, per_batch));
                k += 1;
            }
        }
        SpawnMode::Scheduled => {
            let mut i = 0u64;
            loop {
                let t = i as f64 / concurrency;
                if t >= duration - EVENT_EPSILON {
                    break;
                }
                times.push(t);
                i += 1;
            }
        }
    }
    times
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub link: LinkSpec,
    /// Seconds over which clients are spawned.
    pub duration: f64,
    /// Clients per second.
    pub concurrency: f64,
    pub parallel_flows: u32,
    /// Bytes each client moves.
    pub transfer_bytes: u64,
    pub mode: SpawnMode,
    /// Connection setup before a client moves data; one RTT when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub startup_latency: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        let pos = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be > 0, got {v}")))
            }
        };
        pos("duration", self.duration)?;
        pos("concurrency", self.concurrency)?;
        if self.parallel_flows == 0 {
            return Err(Error::invalid("parallel_flows", "must be > 0"));
        }
        if self.transfer_bytes == 0 {
            return Err(Error::invalid("transfer_bytes", "must be > 0"));
        }
        if let Some(s) = self.startup_latency {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(
                    "startup_latency",
                    format!("must be >= 0, got {s}"),
                ));
            }
        }
        Ok(())
    }

    pub fn startup(&self) -> f64 {
        self.startup_latency.unwrap_or(self.link.rtt)
    }

    pub fn spawn_times(&self) -> Vec<f64> {
        spawn_schedule(self.mode, self.duration, self.concurrency)
    }

    /// Offered bytes per second as a fraction of link capacity.
    pub fn offered_load(&self) -> f64 {
        self.concurrency * self.transfer_bytes as f64 / self.link.effective_rate()
    }

    /// Parses a flat `key = value` file. Values are numbers in SI units or
    /// quantity literals (`25Gbps`, `0.5GB`, `16ms`); `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Schema {
                line: i + 1,
                reason: format!("expected key = value, got {raw:?}"),
            })?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_fields(&fields)
    }

    /// Parses JSON with the same field names, either flat or with a nested
    /// `link` object. Values may be SI numbers or quantity strings.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::invalid("scenario", "expected a JSON object"))?;
        let mut fields = BTreeMap::new();
        let mut put = |k: &str, v: &serde_json::Value| -> Result<()> {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Null => return Ok(()),
                other => {
                    return Err(Error::Invalid {
                        field: "scenario",
                        reason: format!("field {k}: unsupported value {other}"),
                    })
                }
            };
            fields.insert(k.to_string(), s);
            Ok(())
        };
        for (k, v) in obj {
            if k == "link" {
                let link = v
                    .as_object()
                    .ok_or_else(|| Error::invalid("link", "expected an object"))?;
                for (lk, lv) in link {
                    put(lk, lv)?;
                }
            } else {
                put(k, v)?;
            }
        }
        Self::from_fields(&fields)
    }

    /// Picks the format by content: a leading `{` means JSON.
    pub fn from_file_str(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json_str(text)
        } else {
            Self::from_kv_str(text)
        }
    }

    fn from_fields(fields: &BTreeMap<String, String>) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "bandwidth",
            "alpha",
            "rtt",
            "duration",
            "concurrency",
            "parallel_flows",
            "transfer_bytes",
            "mode",
            "startup_latency",
        ];
        if let Some(k) = fields.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::invalid("scenario", format!("unknown field {k:?}")));
        }
        let get = |key: &'static str, dim: Dimension| -> Result<Option<f64>> {
            let Some(raw) = fields.get(key) else {
                return Ok(None);
            };
            let q = units::parse(raw)?;
            if q.dim == dim || q.dim == Dimension::Scalar {
                Ok(Some(q.value))
            } else {
                Err(Error::Invalid {
                    field: key,
                    reason: format!("expected {dim}, got {raw:?}"),
                })
            }
        };
        let need =
            |key: &'static str, dim| get(key, dim)?.ok_or_else(|| Error::invalid(key, "missing"));

        let link = LinkSpec {
            bandwidth: need("bandwidth", Dimension::ByteRate)?,
            alpha: get("alpha", Dimension::Scalar)?.unwrap_or(1.0),
            rtt: get("rtt", Dimension::Seconds)?.unwrap_or(0.016),
        };
        let parallel = get("parallel_flows", Dimension::Scalar)?.unwrap_or(1.0);
        let bytes = need("transfer_bytes", Dimension::Bytes)?;
        let whole = |field: &'static str, v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v)
            } else {
                Err(Error::invalid(
                    field,
                    format!("must be a whole number, got {v}"),
                ))
            }
        };
        let s = Scenario {
            link,
            duration: need("duration", Dimension::Seconds)?,
            concurrency: need("concurrency", Dimension::Scalar)?,
            parallel_flows: whole("parallel_flows", parallel)? as u32,
            transfer_bytes: whole("transfer_bytes", bytes)? as u64,
            mode: fields
                .get("mode")
                .map(|m| m.parse())
                .transpose()?
                .unwrap_or(SpawnMode::Simultaneous),
            startup_latency: get("startup_latency", Dimension::Seconds)?,
        };
        s.validate()?;
        Ok(s)
    }
}

/// A stretch of time over which the allocation did not change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub active: usize,
    /// Sum of per-client rates, bytes/s.
    pub allocated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub records: Vec<FlowRecord>,
    /// Delivered bytes over capacity times the span from first spawn to last
    /// completion.
    pub utilization: f64,
    pub max_fct: f64,
    pub segments: Vec<Segment>,
    /// Integral of each client's allocated rate, indexed by client id.
    pub delivered: Vec<f64>,
}

struct Active {
    id: usize,
    residual: f64,
}

pub fn simulate(s: &Scenario) -> Result<SimResult> {
    s.validate()?;
    let spawns = s.spawn_times();
    if spawns.is_empty() {
        return Err(Error::invalid("scenario", "spawns no clients"));
    }
    let capacity = s.link.effective_rate();
    let size = s.transfer_bytes as f64;
    let startup = s.startup();
    // Spawn times are non-decreasing, so data-start order is id order.
    let starts: Vec<f64> = spawns.iter().map(|t| t + startup).collect();
    let n = spawns.len();

    let mut completion = vec![f64::NAN; n];
    let mut delivered = vec![0.0; n];
    let mut segments = Vec::new();
    let mut active: Vec<Active> = Vec::new();
    let mut next = 0usize;
    let mut now = starts[0];

    loop {
        while next < n && starts[next] <= now + EVENT_EPSILON {
            active.push(Active {
                id: next,
                residual: size,
            });
            next += 1;
        }
        if active.is_empty() {
            if next == n {
                break;
            }
            now = starts[next];
            continue;
        }

        let share = capacity / active.len() as f64;
        let min_residual = active
            .iter()
            .map(|a| a.residual)
            .fold(f64::INFINITY, f64::min);
        let t_done = now + min_residual / share;
        let t_arrival = starts.get(next).copied().unwrap_or(f64::INFINITY);

        if t_arrival < t_done - EVENT_EPSILON {
            let dt = t_arrival - now;
            for a in &mut active {
                a.residual -= share * dt;
                delivered[a.id] += share * dt;
            }
            segments.push(Segment {
                start: now,
                end: t_arrival,
                active: active.len(),
                allocated: share * active.len() as f64,
            });
            now = t_arrival;
            continue;
        }

        let dt = t_done - now;
        segments.push(Segment {
            start: now,
            end: t_done,
            active: active.len(),
            allocated: share * active.len() as f64,
        });
        let coalesce = share * EVENT_EPSILON;
        active.retain_mut(|a| {
            if a.residual - min_residual <= coalesce {
                delivered[a.id] += a.residual;
                completion[a.id] = t_done;
                false
            } else {
                a.residual -= share * dt;
                delivered[a.id] += share * dt;
                true
            }
        });
        now = t_done;
    }

    let records: Vec<FlowRecord> = (0..n)
        .map(|i| {
            FlowRecord::ok(
                i as u64,
                spawns[i],
                completion[i],
                s.transfer_bytes,
                s.parallel_flows,
            )
        })
        .collect();
    let max_fct = records.iter().map(|r| r.fct_s).fold(0.0, f64::max);
    let last = completion.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = last - spawns[0];
    let utilization = if span > 0.0 {
        (size * n as f64 / (capacity * span)).min(1.0)
    } else {
        0.0
    };

    Ok(SimResult {
        records,
        utilization,
        max_fct,
        segments,
        delivered,
    })
}

/// Largest flow completion time among successful records.
pub fn worst_fct(records: &[FlowRecord]) -> Result<f64> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| r.fct_s)
        .reduce(f64::max)
        .ok_or(Error::NoRecords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub offered_load: f64,
    pub mode: SpawnMode,
    pub concurrency: f64,
    pub parallel_flows: u32,
    pub worst_fct: f64,
    pub sss: f64,
    pub utilization: f64,
}

/// Runs every (concurrency, parallel_flows) combination of `base`,
/// concurrency-major. Runs fan out across threads; rows keep input order.
pub fn sweep(
    base: &Scenario,
    concurrency_values: &[f64],
    parallel_values: &[u32],
) -> Result<Vec<SweepRow>> {
    if concurrency_values.is_empty() || parallel_values.is_empty() {
        return Err(Error::invalid("sweep", "value lists must be non-empty"));
    }
    let theoretical = model::theoretical_transfer(base.transfer_bytes as f64, base.link.bandwidth)?;
    let combos: Vec<(f64, u32)> = concurrency_values
        .iter()
        .flat_map(|&c| parallel_values.iter().map(move |&p| (c, p)))
        .collect();
    combos
        .par_iter()
        .map(|&(concurrency, parallel_flows)| {
            let scenario = Scenario {
                concurrency,
                parallel_flows,
                ..base.clone()
            };
            let result = simulate(&scenario)?;
            let worst = worst_fct(&result.records)?;
            Ok(SweepRow {
                offered_load: scenario.offered_load(),
                mode: scenario.mode,
                concurrency,
                parallel_flows,
                worst_fct: worst,
                sss: model::sss(worst, theoretical)?,
                utilization: result.utilization,
            })
        })
        .collect()
}
