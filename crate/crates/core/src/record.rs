//! Flow-record logs shared by the simulator and the live load generator.
//!
//! A log is JSON Lines. The optional first line is a run header
//! `{"run": {<config echo>, "started_unix_ms": N}}`; every other line is one
//! [`FlowRecord`].

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

/// One client transfer: when it was spawned, when its last byte was
/// acknowledged, and how much it moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRecord {
    pub client_id: u64,
    pub spawn_s: f64,
    pub complete_s: f64,
    pub fct_s: f64,
    pub bytes: u64,
    pub flows: u32,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FlowRecord {
    pub fn ok(client_id: u64, spawn_s: f64, complete_s: f64, bytes: u64, flows: u32) -> Self {
        FlowRecord {
            client_id,
            spawn_s,
            complete_s,
            fct_s: complete_s - spawn_s,
            bytes,
            flows,
            status: Status::Ok,
            error: None,
        }
    }

    pub fn failed(
        client_id: u64,
        spawn_s: f64,
        complete_s: f64,
        flows: u32,
        error: impl Into<String>,
    ) -> Self {
        FlowRecord {
            client_id,
            spawn_s,
            complete_s,
            fct_s: complete_s - spawn_s,
            bytes: 0,
            flows,
            status: Status::Error,
            error: Some(error.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn check(&self) -> std::result::Result<(), String> {
        let finite = [self.spawn_s, self.complete_s, self.fct_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite time".into());
        }
        if self.is_ok() {
            if self.complete_s < self.spawn_s {
                return Err("complete_s precedes spawn_s".into());
            }
            if self.fct_s < 0.0 {
                return Err("negative fct_s".into());
            }
        } else if self.error.is_none() {
            return Err("error record without an error message".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub started_unix_ms: u64,
    #[serde(flatten)]
    pub config: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunHeader {
    pub run: RunInfo,
}

impl RunHeader {
    /// Echoes `config` (which must serialize to a JSON object) into a header.
    pub fn new<T: Serialize>(config: &T, started_unix_ms: u64) -> Result<Self> {
        match serde_json::to_value(config)? {
            serde_json::Value::Object(mut map) => {
                map.remove("started_unix_ms");
                Ok(RunHeader {
                    run: RunInfo {
                        started_unix_ms,
                        config: map,
                    },
                })
            }
            other => Err(Error::invalid(
                "run header",
                format!("config must be a JSON object, got {other}"),
            )),
        }
    }

    /// Reads the config echo back into a typed configuration.
    pub fn config<T: DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(serde_json::Value::Object(
            self.run.config.clone(),
        ))?)
    }
}

pub fn unix_ms_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferLog {
    pub header: Option<RunHeader>,
    pub records: Vec<FlowRecord>,
}

impl TransferLog {
    pub fn successful(&self) -> impl Iterator<Item = &FlowRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(h) = &self.header {
            serde_json::to_writer(&mut w, h)?;
            w.write_all(b"\n")?;
        }
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Single pass over the lines in file order. Blank lines are skipped; a
    /// header is accepted only before the first record.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut log = TransferLog::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let schema = |reason: String| Error::Schema {
                line: lineno,
                reason,
            };
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
            if value.get("run").is_some() {
                if log.header.is_some() || !log.records.is_empty() {
                    return Err(schema("run header must be the first line".into()));
                }
                log.header =
                    Some(serde_json::from_value(value).map_err(|e| schema(e.to_string()))?);
                continue;
            }
            let rec: FlowRecord =
                serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
            rec.check().map_err(schema)?;
            log.records.push(rec);
        }
        Ok(log)
    }

    pub fn read_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn write_path(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }
}
