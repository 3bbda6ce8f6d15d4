//! Facility workflows checked against a measured worst-case transfer curve.
//!
//! Each workflow streams at a sustained throughput and needs some amount of
//! compute per data unit. A data unit is `unit_seconds` of acquisition, so a
//! compute demand given as FLOP/s becomes `rate · unit_seconds` FLOP of work.
//! The workflow's link utilization selects a worst-case transfer time from
//! the curve; whatever is left of each tier's deadline is the remote compute
//! budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ComputeSpec, Decision, IoOverhead, LinkSpec, TierPolicy, WorkloadSpec};
use crate::units::{self, Dimension, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub utilization: f64,
    #[serde(deserialize_with = "units::de::seconds")]
    pub worst_fct: f64,
}

/// Piecewise-linear worst-FCT-versus-utilization curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CurvePoint>", into = "Vec<CurvePoint>")]
pub struct WorstFctCurve(Vec<CurvePoint>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interpolated {
    pub worst_fct: f64,
    /// The query fell outside the curve's utilization range.
    pub extrapolated: bool,
}

impl WorstFctCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid(
                "worst_fct_curve",
                "needs at least one point",
            ));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.utilization) {
                return Err(Error::invalid(
                    "worst_fct_curve",
                    format!("utilization {} outside [0, 1]", p.utilization),
                ));
            }
            if !(p.worst_fct.is_finite() && p.worst_fct >= 0.0) {
                return Err(Error::invalid(
                    "worst_fct_curve",
                    format!("worst_fct {} must be >= 0", p.worst_fct),
                ));
            }
        }
        if points
            .windows(2)
            .any(|w| w[1].utilization <= w[0].utilization)
        {
            return Err(Error::invalid(
                "worst_fct_curve",
                "points must be strictly increasing in utilization",
            ));
        }
        Ok(WorstFctCurve(points))
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.0
    }

    pub fn at(&self, u: f64) -> Interpolated {
        let pts = &self.0;
        if let Some(p) = pts.iter().find(|p| p.utilization == u) {
            return Interpolated {
                worst_fct: p.worst_fct,
                extrapolated: false,
            };
        }
        if pts.len() == 1 {
            return Interpolated {
                worst_fct: pts[0].worst_fct,
                extrapolated: true,
            };
        }
        let first = pts[0].utilization;
        let last = pts[pts.len() - 1].utilization;
        let extrapolated = u < first || u > last;
        let i = if u < first {
            0
        } else if u > last {
            pts.len() - 2
        } else {
            pts.windows(2)
                .position(|w| u <= w[1].utilization)
                .unwrap_or(pts.len() - 2)
        };
        let (a, b) = (pts[i], pts[i + 1]);
        let slope = (b.worst_fct - a.worst_fct) / (b.utilization - a.utilization);
        Interpolated {
            worst_fct: (a.worst_fct + slope * (u - a.utilization)).max(0.0),
            extrapolated,
        }
    }
}

impl TryFrom<Vec<CurvePoint>> for WorstFctCurve {
    type Error = Error;
    fn try_from(v: Vec<CurvePoint>) -> Result<Self> {
        WorstFctCurve::new(v)
    }
}

impl From<WorstFctCurve> for Vec<CurvePoint> {
    fn from(c: WorstFctCurve) -> Self {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub name: String,
    /// Sustained bytes/s.
    #[serde(deserialize_with = "units::de::byte_rate")]
    pub throughput: f64,
    /// FLOP/s needed to keep up, or FLOP per data unit.
    #[serde(
        deserialize_with = "units::de::compute",
        serialize_with = "ser_compute"
    )]
    pub compute: Quantity,
}

fn ser_compute<S: serde::Serializer>(q: &Quantity, s: S) -> std::result::Result<S::Ok, S::Error> {
    let unit = if q.dim == Dimension::Flop {
        "FLOP"
    } else {
        "FLOPS"
    };
    s.serialize_str(&format!("{}{unit}", q.value))
}

fn one_second() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyInput {
    pub workflows: Vec<Workflow>,
    pub link: LinkSpec,
    #[serde(default)]
    pub tiers: TierPolicy,
    pub worst_fct_curve: WorstFctCurve,
    /// Seconds of acquisition per data unit.
    #[serde(default = "one_second", deserialize_with = "units::de::seconds")]
    pub unit_seconds: f64,
    /// Instrument-side FLOP/s, enables the local-vs-remote decision.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::de::opt_flop_rate"
    )]
    pub local_rate: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::de::opt_flop_rate"
    )]
    pub remote_rate: Option<f64>,
}

impl CaseStudyInput {
    /// LCLS-II compute-intensive workflows on a 25 Gbps path, with worst-case
    /// transfer times of 1.2 s at 64 % and 6 s at 96 % utilization.
    pub fn lcls_ii() -> Self {
        let flops = |tf: f64| Quantity {
            value: tf * 1e12,
            dim: Dimension::FlopRate,
        };
        CaseStudyInput {
            workflows: vec![
                Workflow {
                    name: "Coherent Scattering (XPCS, XSVS)".into(),
                    throughput: 2e9,
                    compute: flops(34.0),
                },
                Workflow {
                    name: "Liquid Scattering".into(),
                    throughput: 4e9,
                    compute: flops(20.0),
                },
                Workflow {
                    name: "Liquid Scattering (reduced to 3 GB/s)".into(),
                    throughput: 3e9,
                    compute: flops(20.0),
                },
            ],
            link: LinkSpec {
                bandwidth: 25e9 / 8.0,
                alpha: 1.0,
                rtt: 0.016,
            },
            tiers: TierPolicy::default(),
            worst_fct_curve: WorstFctCurve(vec![
                CurvePoint {
                    utilization: 0.64,
                    worst_fct: 1.2,
                },
                CurvePoint {
                    utilization: 0.96,
                    worst_fct: 6.0,
                },
            ]),
            unit_seconds: 1.0,
            local_rate: None,
            remote_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierBudget {
    pub tier: String,
    pub deadline: f64,
    /// Seconds left for remote compute after the worst-case transfer.
    pub budget: f64,
    /// Minimum remote FLOP/s; absent when no budget is left.
    pub required_remote_rate: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub name: String,
    pub throughput: f64,
    pub utilization: f64,
    /// Throughput exceeds what the link can carry.
    pub infeasible: bool,
    pub worst_fct: Option<f64>,
    pub extrapolated: bool,
    pub work_per_unit: Option<f64>,
    pub tiers: Vec<TierBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn evaluate_row(input: &CaseStudyInput, wf: &Workflow) -> Result<CaseStudyRow> {
    input.link.validate()?;
    if !(wf.throughput.is_finite() && wf.throughput > 0.0) {
        return Err(Error::invalid(
            "throughput",
            format!("must be > 0, got {}", wf.throughput),
        ));
    }
    let capacity = input.link.effective_rate();
    let utilization = wf.throughput / capacity;
    let work = match wf.compute.dim {
        Dimension::Flop => wf.compute.value,
        _ => wf.compute.value * input.unit_seconds,
    };
    let workload = WorkloadSpec::from_work(wf.throughput * input.unit_seconds, work)?
        .with_interval(input.unit_seconds)?;

    let mut row = CaseStudyRow {
        name: wf.name.clone(),
        throughput: wf.throughput,
        utilization,
        infeasible: wf.throughput > capacity,
        worst_fct: None,
        extrapolated: false,
        work_per_unit: Some(work),
        tiers: Vec::new(),
        decision: None,
        error: None,
    };
    if row.infeasible {
        return Ok(row);
    }

    let hit = input.worst_fct_curve.at(utilization);
    row.worst_fct = Some(hit.worst_fct);
    row.extrapolated = hit.extrapolated;
    row.tiers = input
        .tiers
        .tiers()
        .iter()
        .map(|t| {
            let budget = model::transfer_budget(t.deadline, hit.worst_fct);
            let required = model::required_remote_rate(&workload, budget).ok();
            let feasible = match (required, input.remote_rate) {
                (Some(need), Some(have)) => have >= need,
                (Some(_), None) => true,
                (None, _) => false,
            };
            TierBudget {
                tier: t.name.clone(),
                deadline: t.deadline,
                budget,
                required_remote_rate: required,
                feasible,
            }
        })
        .collect();

    if let (Some(local), Some(remote)) = (input.local_rate, input.remote_rate) {
        let compute = ComputeSpec::new(local, remote)?;
        row.decision = Some(model::decide(
            &workload,
            &input.link,
            &compute,
            IoOverhead::STREAMING,
            &input.tiers,
            Some(hit.worst_fct),
        )?);
    }
    Ok(row)
}

/// One row per workflow. A row that fails carries its error and the other
/// rows are still computed.
pub fn run(input: &CaseStudyInput) -> Vec<CaseStudyRow> {
    input
        .workflows
        .iter()
        .map(|wf| {
            evaluate_row(input, wf).unwrap_or_else(|e| CaseStudyRow {
                name: wf.name.clone(),
                throughput: wf.throughput,
                utilization: f64::NAN,
                infeasible: false,
                worst_fct: None,
                extrapolated: false,
                work_per_unit: None,
                tiers: Vec::new(),
                decision: None,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(points: &[(f64, f64)]) -> WorstFctCurve {
        WorstFctCurve::new(
            points
                .iter()
                .map(|&(utilization, worst_fct)| CurvePoint {
                    utilization,
                    worst_fct,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn interpolation() {
        let c = curve(&[(0.64, 1.2), (0.96, 6.0)]);
        assert_eq!(
            c.at(0.64),
            Interpolated {
                worst_fct: 1.2,
                extrapolated: false
            }
        );
        assert_eq!(c.at(0.96).worst_fct, 6.0);
        let mid = c.at(0.8);
        assert_relative_eq!(mid.worst_fct, 3.6, max_relative = 1e-12);
        assert!(!mid.extrapolated);
        let hi = c.at(1.0);
        assert!(hi.extrapolated);
        assert_relative_eq!(hi.worst_fct, 6.6, max_relative = 1e-12);
        let lo = c.at(0.0);
        assert!(lo.extrapolated);
        assert_eq!(lo.worst_fct, 0.0);

        let single = curve(&[(0.5, 2.0)]);
        assert_eq!(
            single.at(0.5),
            Interpolated {
                worst_fct: 2.0,
                extrapolated: false
            }
        );
        assert!(single.at(0.7).extrapolated);
    }

    #[test]
    fn curve_validation() {
        assert!(WorstFctCurve::new(vec![]).is_err());
        assert!(WorstFctCurve::new(vec![CurvePoint {
            utilization: 1.5,
            worst_fct: 1.0
        }])
        .is_err());
        assert!(WorstFctCurve::new(vec![
            CurvePoint {
                utilization: 0.9,
                worst_fct: 1.0
            },
            CurvePoint {
                utilization: 0.5,
                worst_fct: 1.0
            },
        ])
        .is_err());
    }

    #[test]
    fn lcls_budgets() {
        let rows = run(&CaseStudyInput::lcls_ii());
        assert_eq!(rows.len(), 3);

        let coherent = &rows[0];
        assert!(!coherent.infeasible);
        assert_relative_eq!(coherent.utilization, 0.64, max_relative = 1e-12);
        assert_eq!(coherent.worst_fct, Some(1.2));
        let t2 = &coherent.tiers[1];
        assert!((t2.budget - 8.8).abs() <= 1e-9);
        assert!((t2.required_remote_rate.unwrap() / 1e12 - 3.864).abs() < 1e-3);
        assert_eq!(coherent.tiers[0].budget, 0.0);
        assert!(!coherent.tiers[0].feasible);

        assert!(rows[1].infeasible);
        assert!(rows[1].tiers.is_empty());

        let reduced = &rows[2];
        assert_eq!(reduced.worst_fct, Some(6.0));
        assert!((reduced.tiers[1].budget - 4.0).abs() <= 1e-9);
        assert_relative_eq!(
            reduced.tiers[1].required_remote_rate.unwrap(),
            5e12,
            max_relative = 1e-12
        );
    }

    #[test]
    fn json_input_with_literals() {
        let text = r#"{
            "workflows": [
                {"name": "coherent", "throughput": "2GBps", "compute": "34TF"},
                {"name": "bad", "throughput": "2GBps", "compute": "34TFLOP"}
            ],
            "link": {"bandwidth": "25Gbps", "alpha": 1, "rtt": "16ms"},
            "tiers": [{"name": "Tier 1", "deadline": "1s"}, {"name": "Tier 2", "deadline": "10s"}],
            "worst_fct_curve": [{"utilization": 0.64, "worst_fct": "1.2s"}, {"utilization": 0.96, "worst_fct": 6}],
            "local_rate": "10TF",
            "remote_rate": "100TF"
        }"#;
        let input: CaseStudyInput = serde_json::from_str(text).unwrap();
        assert_eq!(input.unit_seconds, 1.0);
        let rows = run(&input);
        assert!((rows[0].tiers[1].budget - 8.8).abs() < 1e-9);
        assert!(rows[0].tiers[1].feasible);
        // 34 TFLOP total on 10 TF local is 3.4 s; remote is 1.2 + 0.34
        let d = rows[0].decision.as_ref().unwrap();
        assert_eq!(d.choice, model::Choice::RemoteStream);
        assert_eq!(rows[1].work_per_unit, Some(34e12));
    }

    #[test]
    fn bad_rows_do_not_poison_others() {
        let mut input = CaseStudyInput::lcls_ii();
        input.workflows[0].throughput = -1.0;
        let rows = run(&input);
        assert!(rows[0].error.is_some());
        assert!(rows[2].error.is_none());
        assert!((rows[2].tiers[1].budget - 4.0).abs() <= 1e-9);
    }
}
