use std::fmt::Write as _;
use std::io::Write as _;

use anyhow::{Context, Result};
use serde::Serialize;
use streamscore_core::analysis::{self, FctStats};
use streamscore_loadgen::{run_clients, ClientRunConfig, Server, ServerConfig};

use super::{Outcome, Output};
use crate::args::{RunArgs, ServeArgs};

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

pub fn serve(a: &ServeArgs) -> Result<Outcome> {
    let cfg = ServerConfig::new(a.base_port, a.pool_size, a.bind_address.clone());
    runtime()?.block_on(async {
        let server = Server::bind(&cfg).await?;
        let last = a.base_port + (a.pool_size - 1);
        {
            let mut stdout = std::io::stdout().lock();
            writeln!(
                stdout,
                "listening on {}:{}-{}",
                cfg.bind_address, a.base_port, last
            )?;
            stdout.flush()?;
        }
        let stats = server.stats();
        server
            .run_until(async {
                if let Err(e) = tokio::signal::ctrl_c().await {
                    tracing::error!(error = %e, "cannot wait for interrupt");
                }
            })
            .await;
        eprintln!("stopped: {:?}", stats.snapshot());
        Ok(Outcome::Ok)
    })
}

#[derive(Serialize)]
struct RunSummary {
    records: usize,
    ok: usize,
    failures: usize,
    /// Every successful record moved exactly the configured byte count.
    byte_audit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<FctStats>,
}

pub fn run(a: &RunArgs, out: &Output) -> Result<Outcome> {
    let cfg = ClientRunConfig {
        server_address: a.server.clone(),
        base_port: a.base_port,
        pool_size: a.pool_size,
        duration: a.duration,
        concurrency: a.concurrency,
        parallel_flows: a.parallel,
        transfer_bytes: a.size,
        mode: a.mode,
        connect_timeout: a.connect_timeout,
        transfer_timeout: a.transfer_timeout,
    };
    let log = runtime()?.block_on(run_clients(&cfg))?;
    if let Some(p) = &out.path {
        log.write_path(p)
            .with_context(|| format!("writing {}", p.display()))?;
    }

    let failures = log.failures();
    let summary = RunSummary {
        records: log.records.len(),
        ok: log.records.len() - failures,
        failures,
        byte_audit: log.successful().all(|r| r.bytes == cfg.transfer_bytes),
        stats: analysis::summarize(&log.records).ok(),
    };
    out.emit(&summary, || {
        let mut s = String::new();
        let _ = writeln!(s, "records       {}", summary.records);
        let _ = writeln!(s, "ok            {}", summary.ok);
        let _ = writeln!(s, "failures      {}", summary.failures);
        let _ = writeln!(
            s,
            "byte audit    {}",
            if summary.byte_audit { "pass" } else { "FAIL" }
        );
        if let Some(st) = &summary.stats {
            let _ = writeln!(
                s,
                "fct p50/p99/max  {:.4} / {:.4} / {:.4} s",
                st.p50, st.p99, st.max
            );
        }
        s
    })?;
    Ok(if failures > 0 || !summary.byte_audit {
        Outcome::Infeasible
    } else {
        Outcome::Ok
    })
}
