use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

pub mod analyze;
pub mod casestudy;
pub mod measure;
pub mod model;
pub mod simulate;

/// How a command finished, when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Streaming cannot work, or a measured run had failed transfers.
    Infeasible,
}

pub struct Output {
    pub json: bool,
    pub path: Option<PathBuf>,
}

impl Output {
    /// Prints `value` as JSON or as the text `human` renders.
    pub fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) -> Result<()> {
        let mut stdout = std::io::stdout().lock();
        if self.json {
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        } else {
            write!(stdout, "{}", human())?;
        }
        Ok(())
    }

    /// Writes `value` as JSON to `--out`, if given.
    pub fn save_json<T: Serialize>(&self, value: &T) -> Result<()> {
        if let Some(p) = &self.path {
            let f =
                std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
        }
        Ok(())
    }
}

pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn secs(v: f64) -> String {
    format!("{v:.6} s")
}
