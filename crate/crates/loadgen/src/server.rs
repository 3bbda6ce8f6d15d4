use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinSet;

use crate::error::{Error, Result};
use crate::wire::{self, ACK, HEADER_LEN};

const READ_BUFFER: usize = 256 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub base_port: u16,
    /// Listeners on `base_port .. base_port + pool_size`.
    pub pool_size: u16,
    pub bind_address: String,
}

impl ServerConfig {
    pub fn new(base_port: u16, pool_size: u16, bind_address: impl Into<String>) -> Self {
        ServerConfig {
            base_port,
            pool_size,
            bind_address: bind_address.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::config("pool_size", "must be at least 1"));
        }
        if self.base_port == 0 {
            return Err(Error::config("base_port", "must be nonzero"));
        }
        if self.base_port as u32 + self.pool_size as u32 - 1 > u16::MAX as u32 {
            return Err(Error::config(
                "pool_size",
                format!(
                    "{} ports from {} exceed 65535",
                    self.pool_size, self.base_port
                ),
            ));
        }
        Ok(())
    }

    pub fn ports(&self) -> impl Iterator<Item = u16> {
        let base = self.base_port;
        (0..self.pool_size).map(move |i| base + i)
    }
}

/// Counters shared by every connection handler.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub connections: AtomicU64,
    pub transfers: AtomicU64,
    pub rejected: AtomicU64,
    pub bytes: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatsSnapshot {
    pub connections: u64,
    pub transfers: u64,
    pub rejected: u64,
    pub bytes: u64,
}

impl ServerStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            connections: self.connections.load(Ordering::Relaxed),
            transfers: self.transfers.load(Ordering::Relaxed),
            rejected: self.rejected.load(Ordering::Relaxed),
            bytes: self.bytes.load(Ordering::Relaxed),
        }
    }
}

pub struct Server {
    listeners: Vec<TcpListener>,
    stats: Arc<ServerStats>,
}

impl Server {
    /// Binds every port in the pool. If any port is taken the listeners
    /// bound so far are dropped and the error names the failing port.
    pub async fn bind(cfg: &ServerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut listeners = Vec::with_capacity(cfg.pool_size as usize);
        for port in cfg.ports() {
            match TcpListener::bind((cfg.bind_address.as_str(), port)).await {
                Ok(l) => listeners.push(l),
                Err(source) => {
                    drop(listeners);
                    return Err(Error::Bind {
                        address: cfg.bind_address.clone(),
                        port,
                        source,
                    });
                }
            }
        }
        Ok(Server {
            listeners,
            stats: Arc::default(),
        })
    }

    pub fn local_addrs(&self) -> Vec<SocketAddr> {
        self.listeners
            .iter()
            .filter_map(|l| l.local_addr().ok())
            .collect()
    }

    pub fn stats(&self) -> Arc<ServerStats> {
        self.stats.clone()
    }

    /// Serves until `shutdown` resolves. In-flight connections are dropped.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) {
        let mut accept_loops = JoinSet::new();
        for l in self.listeners {
            accept_loops.spawn(accept_loop(l, self.stats.clone()));
        }
        tracing::info!(listeners = accept_loops.len(), "serving");
        shutdown.await;
        accept_loops.shutdown().await;
        tracing::info!(stats = ?self.stats.snapshot(), "stopped");
    }
}

async fn accept_loop(listener: TcpListener, stats: Arc<ServerStats>) {
    let mut handlers = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    stats.connections.fetch_add(1, Ordering::Relaxed);
                    let stats = stats.clone();
                    handlers.spawn(async move {
                        if let Err(e) = handle(stream, &stats).await {
                            tracing::debug!(%peer, error = %e, "connection closed");
                        }
                    });
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            Some(_) = handlers.join_next() => {}
        }
    }
}

/// Serves transfers on one connection until the peer closes it.
async fn handle(stream: TcpStream, stats: &ServerStats) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut conn = BufReader::with_capacity(READ_BUFFER, stream);
    loop {
        let mut h = [0u8; HEADER_LEN];
        match conn.read_exact(&mut h).await {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let len = match wire::decode_header(&h) {
            Ok(len) => len,
            Err(e) => {
                stats.rejected.fetch_add(1, Ordering::Relaxed);
                return Err(e);
            }
        };
        let got = tokio::io::copy_buf(&mut (&mut conn).take(len), &mut tokio::io::sink()).await?;
        stats.bytes.fetch_add(got, Ordering::Relaxed);
        if got < len {
            return Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("payload ended after {got} of {len} bytes"),
            )
            .into());
        }
        conn.get_mut().write_all(&[ACK]).await?;
        stats.transfers.fetch_add(1, Ordering::Relaxed);
    }
}
