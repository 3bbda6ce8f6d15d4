use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use streamscore_core::fluidsim::SpawnMode;
use streamscore_core::model::{IoOverhead, TierPolicy};
use streamscore_core::units;

#[derive(Debug, Parser)]
#[command(
    name = "streamscore",
    version,
    about = "Stream-or-stage decisions for instrument data"
)]
pub struct Cli {
    /// Machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the completion-time model for one data unit.
    Model(ModelArgs),
    /// Run the flow-level simulator, once or as a sweep.
    Simulate(SimulateArgs),
    /// Live measurement over TCP.
    Measure {
        #[command(subcommand)]
        command: MeasureCommand,
    },
    /// Statistics, regime and report files for a transfer log.
    Analyze(AnalyzeArgs),
    /// Feasibility table for a set of instrument workflows.
    Casestudy(CaseStudyArgs),
}

#[derive(Debug, Subcommand)]
pub enum MeasureCommand {
    /// Listen on a pool of sequential ports until interrupted.
    Serve(ServeArgs),
    /// Spawn transfer clients against a running pool.
    Run(RunArgs),
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn bytes(s: &str) -> Result<f64, String> {
    units::bytes(s).map_err(err)
}

pub fn byte_count(s: &str) -> Result<u64, String> {
    let v = units::bytes(s).map_err(err)?;
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("{s} is not a whole number of bytes"));
    }
    Ok(v as u64)
}

pub fn byte_rate(s: &str) -> Result<f64, String> {
    units::byte_rate(s).map_err(err)
}

pub fn seconds(s: &str) -> Result<f64, String> {
    units::seconds(s).map_err(err)
}

pub fn flop(s: &str) -> Result<f64, String> {
    units::flop(s).map_err(err)
}

pub fn flop_rate(s: &str) -> Result<f64, String> {
    units::flop_rate(s).map_err(err)
}

pub fn scalar(s: &str) -> Result<f64, String> {
    units::scalar(s).map_err(err)
}

pub fn theta(s: &str) -> Result<IoOverhead, String> {
    IoOverhead::new(scalar(s)?).map_err(err)
}

pub fn tiers(s: &str) -> Result<TierPolicy, String> {
    TierPolicy::from_deadlines(&units::seconds_list(s).map_err(err)?).map_err(err)
}

pub fn mode(s: &str) -> Result<SpawnMode, String> {
    s.parse().map_err(err)
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("compute").required(true).args(["work", "complexity"])))]
pub struct ModelArgs {
    /// Bytes per data unit, e.g. 0.5GB.
    #[arg(long, value_parser = bytes)]
    pub size: f64,
    /// Link bandwidth, e.g. 25Gbps.
    #[arg(long, value_parser = byte_rate)]
    pub bw: f64,
    /// Fraction of the bandwidth a transfer achieves.
    #[arg(long, default_value = "1", value_parser = scalar)]
    pub alpha: f64,
    /// File-staging overhead factor, at least 1.
    #[arg(long, default_value = "1", value_parser = theta)]
    pub theta: IoOverhead,
    /// Work per data unit, e.g. 34TFLOP.
    #[arg(long, value_parser = flop)]
    pub work: Option<f64>,
    /// Work per byte, FLOP/byte.
    #[arg(long, value_parser = scalar)]
    pub complexity: Option<f64>,
    #[arg(long, value_parser = flop_rate)]
    pub local_rate: Option<f64>,
    #[arg(long, value_parser = flop_rate)]
    pub remote_rate: Option<f64>,
    /// Observed worst-case transfer time; enables the speed score.
    #[arg(long, value_parser = seconds)]
    pub worst: Option<f64>,
    /// Seconds between data units from a paced source.
    #[arg(long, value_parser = seconds)]
    pub interval: Option<f64>,
    #[arg(long, default_value = "1s,10s,60s", value_parser = tiers)]
    pub tiers: TierPolicy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (key = value lines or JSON). Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = byte_rate)]
    pub bw: Option<f64>,
    #[arg(long, value_parser = scalar)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = seconds)]
    pub rtt: Option<f64>,
    /// Per-client setup delay before data moves; defaults to the RTT.
    #[arg(long, value_parser = seconds)]
    pub startup: Option<f64>,
    #[arg(long, value_parser = seconds)]
    pub duration: Option<f64>,
    /// Clients per second; a comma list with --sweep.
    #[arg(long)]
    pub concurrency: Option<String>,
    /// Flows per client; a comma list with --sweep.
    #[arg(long)]
    pub parallel: Option<String>,
    /// Bytes per client.
    #[arg(long, value_parser = byte_count)]
    pub size: Option<u64>,
    /// simultaneous or scheduled; a comma list with --sweep.
    #[arg(long)]
    pub mode: Option<String>,
    /// Run every combination of the list-valued flags.
    #[arg(long)]
    pub sweep: bool,
    /// A measured log to compare the simulated run against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 5201)]
    pub base_port: u16,
    #[arg(long, default_value_t = 8)]
    pub pool_size: u16,
    #[arg(long = "bind", default_value = "0.0.0.0")]
    pub bind_address: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub server: String,
    #[arg(long, default_value_t = 5201)]
    pub base_port: u16,
    #[arg(long, default_value_t = 8)]
    pub pool_size: u16,
    #[arg(long, value_parser = seconds)]
    pub duration: f64,
    /// Clients per second.
    #[arg(long, value_parser = scalar)]
    pub concurrency: f64,
    #[arg(long, default_value_t = 1)]
    pub parallel: u32,
    /// Bytes per client.
    #[arg(long, value_parser = byte_count)]
    pub size: u64,
    #[arg(long, default_value = "simultaneous", value_parser = mode)]
    pub mode: SpawnMode,
    #[arg(long, default_value = "10s", value_parser = seconds)]
    pub connect_timeout: f64,
    #[arg(long, default_value = "120s", value_parser = seconds)]
    pub transfer_timeout: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Transfer log (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Link bandwidth; enables the speed score, utilization and delay split.
    #[arg(long, value_parser = byte_rate)]
    pub link_bw: Option<f64>,
    #[arg(long, default_value = "1", value_parser = scalar)]
    pub alpha: f64,
    #[arg(long, default_value = "16ms", value_parser = seconds)]
    pub rtt: f64,
    #[arg(long, default_value = "1s,10s,60s", value_parser = tiers)]
    pub tiers: TierPolicy,
    /// A second log; the report gains per-statistic ratios.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Work per transferred unit; with the rates, adds a decision.
    #[arg(long, value_parser = flop, conflicts_with = "complexity")]
    pub work: Option<f64>,
    #[arg(long, value_parser = scalar)]
    pub complexity: Option<f64>,
    #[arg(long, value_parser = flop_rate, requires = "remote_rate")]
    pub local_rate: Option<f64>,
    #[arg(long, value_parser = flop_rate, requires = "local_rate")]
    pub remote_rate: Option<f64>,
    #[arg(long, default_value = "1", value_parser = theta)]
    pub theta: IoOverhead,
    /// Scan description (JSON) for a streaming-vs-file comparison.
    #[arg(long)]
    pub scan: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// Workflows, link, tiers and curve as JSON. Defaults to the built-in
    /// LCLS-II table.
    #[arg(long)]
    pub input: Option<PathBuf>,
}
