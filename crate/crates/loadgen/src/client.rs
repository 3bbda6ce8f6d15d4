use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use streamscore_core::fluidsim::{spawn_schedule, Scenario, SpawnMode};
use streamscore_core::model::LinkSpec;
use streamscore_core::record::{unix_ms_now, FlowRecord, RunHeader, TransferLog};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::task::JoinSet;
use tokio::time::{timeout, Instant};

use crate::error::{Error, Result};
use crate::wire;

fn default_pool_size() -> u16 {
    1
}
fn default_connect_timeout() -> f64 {
    10.0
}
fn default_transfer_timeout() -> f64 {
    120.0
}

/// A measured run. Apart from the addressing and timeout fields this is the
/// same shape as a simulator [`Scenario`], so the two can be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRunConfig {
    pub server_address: String,
    pub base_port: u16,
    #[serde(default = "default_pool_size")]
    pub pool_size: u16,
    /// Seconds over which clients are spawned.
    pub duration: f64,
    /// Clients per second.
    pub concurrency: f64,
    pub parallel_flows: u32,
    pub transfer_bytes: u64,
    pub mode: SpawnMode,
    #[serde(default = "default_connect_timeout")]
    pub connect_timeout: f64,
    /// Per connection, from connect to acknowledgment.
    #[serde(default = "default_transfer_timeout")]
    pub transfer_timeout: f64,
}

impl ClientRunConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        server_address: impl Into<String>,
        base_port: u16,
        pool_size: u16,
        duration: f64,
        concurrency: f64,
        parallel_flows: u32,
        transfer_bytes: u64,
        mode: SpawnMode,
    ) -> Self {
        ClientRunConfig {
            server_address: server_address.into(),
            base_port,
            pool_size,
            duration,
            concurrency,
            parallel_flows,
            transfer_bytes,
            mode,
            connect_timeout: default_connect_timeout(),
            transfer_timeout: default_transfer_timeout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive("duration", self.duration)?;
        positive("concurrency", self.concurrency)?;
        positive("connect_timeout", self.connect_timeout)?;
        positive("transfer_timeout", self.transfer_timeout)?;
        if self.parallel_flows == 0 {
            return Err(Error::config("parallel_flows", "must be at least 1"));
        }
        if self.pool_size == 0 {
            return Err(Error::config("pool_size", "must be at least 1"));
        }
        if self.base_port == 0
            || self.base_port as u32 + self.pool_size as u32 - 1 > u16::MAX as u32
        {
            return Err(Error::config("base_port", "pool does not fit in 1..=65535"));
        }
        Ok(())
    }

    pub fn port_for(&self, client: u64) -> u16 {
        self.base_port + (client % self.pool_size as u64) as u16
    }

    pub fn spawn_times(&self) -> Vec<f64> {
        spawn_schedule(self.mode, self.duration, self.concurrency)
    }

    /// The simulator scenario for this run over `link`.
    pub fn scenario(&self, link: LinkSpec) -> Scenario {
        Scenario {
            link,
            duration: self.duration,
            concurrency: self.concurrency,
            parallel_flows: self.parallel_flows,
            transfer_bytes: self.transfer_bytes,
            mode: self.mode,
            startup_latency: None,
        }
    }
}

async fn resolve(host: &str) -> Result<IpAddr> {
    if let Ok(ip) = host.parse() {
        return Ok(ip);
    }
    tokio::net::lookup_host((host, 0))
        .await?
        .next()
        .map(|a| a.ip())
        .ok_or_else(|| Error::config("server_address", format!("{host} did not resolve")))
}

/// Runs the configured clients against a server pool and collects one
/// record per client, ordered by client id.
pub async fn run_clients(cfg: &ClientRunConfig) -> Result<TransferLog> {
    cfg.validate()?;
    let ip = resolve(&cfg.server_address).await?;
    let schedule = cfg.spawn_times();
    let header = RunHeader::new(cfg, unix_ms_now())?;
    let epoch = Instant::now();
    tracing::info!(clients = schedule.len(), mode = %cfg.mode, "starting run");

    let (tx, mut rx) = mpsc::unbounded_channel();
    let spawner = {
        let cfg = cfg.clone();
        tokio::spawn(async move {
            let mut clients = JoinSet::new();
            for (id, t) in schedule.into_iter().enumerate() {
                tokio::time::sleep_until(epoch + Duration::from_secs_f64(t)).await;
                let id = id as u64;
                let addr = SocketAddr::new(ip, cfg.port_for(id));
                let cfg = cfg.clone();
                let tx = tx.clone();
                clients.spawn(async move {
                    let rec = run_client(id, addr, &cfg, epoch).await;
                    let _ = tx.send(rec);
                });
            }
            while clients.join_next().await.is_some() {}
        })
    };

    let mut records = Vec::new();
    while let Some(rec) = rx.recv().await {
        if let Some(e) = &rec.error {
            tracing::warn!(client = rec.client_id, error = %e, "transfer failed");
        }
        records.push(rec);
    }
    spawner.await.map_err(std::io::Error::other)?;
    records.sort_by_key(|r| r.client_id);
    Ok(TransferLog {
        header: Some(header),
        records,
    })
}

async fn run_client(
    id: u64,
    addr: SocketAddr,
    cfg: &ClientRunConfig,
    epoch: Instant,
) -> FlowRecord {
    let spawn_s = epoch.elapsed().as_secs_f64();
    let mut flows = JoinSet::new();
    for len in wire::split_bytes(cfg.transfer_bytes, cfg.parallel_flows) {
        let connect = Duration::from_secs_f64(cfg.connect_timeout);
        let transfer = Duration::from_secs_f64(cfg.transfer_timeout);
        flows.spawn(run_flow(addr, len, connect, transfer));
    }
    let mut sent = 0u64;
    let mut failure = None;
    while let Some(joined) = flows.join_next().await {
        match joined
            .map_err(|e| e.to_string())
            .and_then(|r| r.map_err(|e| e.to_string()))
        {
            Ok(n) => sent += n,
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    let complete_s = epoch.elapsed().as_secs_f64();
    if failure.is_none() && sent != cfg.transfer_bytes {
        failure = Some(
            Error::Audit {
                sent,
                expected: cfg.transfer_bytes,
            }
            .to_string(),
        );
    }
    match failure {
        None => FlowRecord::ok(id, spawn_s, complete_s, sent, cfg.parallel_flows),
        Some(e) => FlowRecord::failed(id, spawn_s, complete_s, cfg.parallel_flows, e),
    }
}

/// One connection: header, payload, acknowledgment. Returns bytes acknowledged.
async fn run_flow(
    addr: SocketAddr,
    len: u64,
    connect: Duration,
    transfer: Duration,
) -> Result<u64> {
    let mut stream = timeout(connect, TcpStream::connect(addr))
        .await
        .map_err(|_| Error::Timeout {
            what: "connect",
            after: connect,
        })??;
    stream.set_nodelay(true)?;
    timeout(transfer, async {
        wire::send_transfer(&mut stream, len).await?;
        wire::read_ack(&mut stream).await
    })
    .await
    .map_err(|_| Error::Timeout {
        what: "transfer",
        after: transfer,
    })??;
    Ok(len)
}
