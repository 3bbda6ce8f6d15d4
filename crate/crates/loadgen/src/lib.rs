//! Live flow-completion-time measurement.
//!
//! A [`server::Server`] listens on a pool of sequential ports and
//! acknowledges every transfer it fully receives. [`client::run_clients`]
//! launches clients on the same schedule the simulator uses, each splitting
//! its bytes across parallel connections, and returns a
//! [`TransferLog`](streamscore_core::record::TransferLog) that the analysis
//! code reads like any simulated log.

pub mod client;
pub mod error;
pub mod server;
pub mod wire;

pub use client::{run_clients, ClientRunConfig};
pub use error::{Error, Result};
pub use server::{Server, ServerConfig, ServerStats};
