use std::fmt::Write;

use anyhow::{Context, Result};
use streamscore_core::casestudy::{self, CaseStudyInput, CaseStudyRow};

use super::{read_text, Outcome, Output};
use crate::args::CaseStudyArgs;

pub fn run(a: &CaseStudyArgs, out: &Output) -> Result<Outcome> {
    let input = match &a.input {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => CaseStudyInput::lcls_ii(),
    };
    let rows = casestudy::run(&input);
    out.save_json(&rows)?;
    out.emit(&rows, || table(&rows))?;
    Ok(Outcome::Ok)
}

fn table(rows: &[CaseStudyRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = write!(s, "{}: {:.2} GB/s", r.name, r.throughput / 1e9);
        if let Some(e) = &r.error {
            let _ = writeln!(s, ", error: {e}");
            continue;
        }
        let _ = write!(s, ", utilization {:.1}%", r.utilization * 100.0);
        if r.infeasible {
            let _ = writeln!(s, ", INFEASIBLE: exceeds link capacity");
            continue;
        }
        if let Some(w) = r.worst_fct {
            let tag = if r.extrapolated {
                " (extrapolated)"
            } else {
                ""
            };
            let _ = write!(s, ", worst-case transfer {w:.3} s{tag}");
        }
        let _ = writeln!(s);
        for t in &r.tiers {
            let _ = write!(s, "  {} ({} s): ", t.tier, t.deadline);
            match t.required_remote_rate {
                Some(rate) => {
                    let _ = writeln!(
                        s,
                        "budget {:.3} s, needs {:.3} TFLOP/s remote",
                        t.budget,
                        rate / 1e12
                    );
                }
                None => {
                    let _ = writeln!(s, "no compute budget left");
                }
            }
        }
        if let Some(d) = &r.decision {
            let _ = writeln!(s, "  decision: {:?}, {}", d.choice, d.rationale);
        }
    }
    s
}
