//! Decision support for streaming instrument data to remote HPC.
//!
//! The crate is split along the workflow:
//!
//! - [`units`] parses unit-suffixed quantity literals into SI values.
//! - [`model`] holds the completion-time model, the streaming speed score,
//!   tier classification and the local-vs-remote decision.
//! - [`fluidsim`] is a deterministic fluid simulator of one bottleneck link
//!   shared max-min fairly among transfer clients.
//! - [`record`] defines the JSONL flow-record log shared by the simulator and
//!   the live load generator.
//! - [`analysis`] turns flow logs into tail statistics, CDFs, regimes and
//!   reports.
//! - [`casestudy`] evaluates facility workflows against a measured
//!   worst-case transfer curve.

pub mod analysis;
pub mod casestudy;
pub mod error;
pub mod fluidsim;
pub mod model;
pub mod record;
pub mod units;

pub use error::{Error, Result};
