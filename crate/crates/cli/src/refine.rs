//! Refinement studies along one numerical axis.

use std::path::Path;

use serde::{Deserialize, Serialize};

use viscflow_core::domain::GalerkinBasis;

use crate::run::{run, Metrics, RunOptions};
use crate::scenario::{PotentialSpec, Scenario};
use crate::{HarnessError, EXIT_OK, EXIT_REJECTED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Dt,
    M,
    N,
    Eps,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub value: f64,
    pub dt: f64,
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub steps: usize,
    pub status: String,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// log₂ of the ratio to the previous level, per metric.
    pub order_mass: Option<f64>,
    pub order_renorm: Option<f64>,
    pub order_w1: Option<f64>,
    pub order_w3_excluded: Option<f64>,
    pub order_rel_energy: Option<f64>,
    pub order_energy_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<LevelRow>,
    /// Set when a level failed; rows then hold the levels before it.
    pub failure: Option<String>,
}

impl Table {
    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            EXIT_REJECTED
        } else {
            EXIT_OK
        }
    }
}

/// Level k scales the axis by 2^{±k}: dt, eps and delta halve, m and n double.
/// With `couple_m` on the dt axis, m grows like dt^{−1/2}.
pub fn level_scenario(base: &Scenario, axis: Axis, k: usize, couple_m: bool) -> Result<(Scenario, f64), HarnessError> {
    let mut s = base.clone();
    let f = 2f64.powi(k as i32);
    let nm = &mut s.numerics;
    let value = match axis {
        Axis::Dt => {
            nm.dt /= f;
            if couple_m {
                nm.m = (base.numerics.m as f64 * f.sqrt()).round() as usize;
            }
            nm.dt
        }
        Axis::M => {
            nm.m *= 1 << k;
            nm.m as f64
        }
        Axis::N => {
            nm.n *= 1 << k;
            nm.n as f64
        }
        Axis::Eps => {
            nm.eps /= f;
            nm.eps
        }
        Axis::Delta => {
            let d = match &mut s.potential {
                PotentialSpec::Newtonian { delta, .. } | PotentialSpec::PPotential { delta, .. } => delta,
            };
            if *d <= 0.0 {
                return Err(HarnessError::Invalid("delta axis needs a positive base delta".into()));
            }
            *d /= f;
            *d
        }
    };
    Ok((s, value))
}

fn order(prev: f64, cur: f64) -> Option<f64> {
    (prev > 0.0 && cur > 0.0).then(|| (prev / cur).log2())
}

pub fn refine(base: &Scenario, axis: Axis, levels: usize, couple_m: bool) -> Result<Table, HarnessError> {
    if levels < 2 {
        return Err(HarnessError::Invalid("refine needs at least 2 levels".into()));
    }
    let mut scns = Vec::with_capacity(levels);
    for k in 0..levels {
        scns.push(level_scenario(base, axis, k, couple_m)?);
    }
    // one mode outside every level's space, on the coarsest grid that holds it
    let n_top = scns.iter().map(|(s, _)| s.numerics.n).max().unwrap_or(1);
    let m_min = scns.iter().map(|(s, _)| s.numerics.m).min().unwrap_or(2);
    let excluded = if n_top < GalerkinBasis::available_modes(m_min) {
        GalerkinBasis::mode_list(m_min, n_top + 1).ok().and_then(|l| l.last().copied())
    } else {
        None
    };
    let opts = RunOptions { out: None, excluded_mode: excluded };
    let results: Vec<_> = std::thread::scope(|sc| {
        let hs: Vec<_> = scns.iter().map(|(s, _)| sc.spawn(|| run(s, &opts))).collect();
        hs.into_iter().map(|h| h.join().expect("level thread panicked")).collect()
    });

    let mut rows: Vec<LevelRow> = Vec::new();
    let mut failure = None;
    for (k, ((s, value), res)) in scns.iter().zip(results).enumerate() {
        let out = match res {
            Ok(o) => o,
            Err(e) => {
                failure = Some(format!("level {k}: {e}"));
                break;
            }
        };
        let m = out.metrics;
        let p = rows.last().map(|r| r.metrics);
        let o = |f: fn(&Metrics) -> f64| p.and_then(|p| order(f(&p), f(&m)));
        rows.push(LevelRow {
            level: k,
            value: *value,
            dt: s.numerics.dt,
            m: s.numerics.m,
            n: s.numerics.n,
            eps: s.numerics.eps,
            steps: out.summary.steps_accepted,
            status: out.summary.status.clone(),
            metrics: m,
            order_mass: o(|m| m.mass_residual_max),
            order_renorm: o(|m| m.renorm_square_total),
            order_w1: o(|m| m.w1_total),
            order_w3_excluded: o(|m| m.w3_excluded),
            order_rel_energy: o(|m| m.rel_energy_final),
            order_energy_defect: o(|m| m.energy_equality_defect.abs()),
        });
        if let Some(f) = out.summary.failure {
            failure = Some(format!("level {k}: {f}"));
            break;
        }
    }
    Ok(Table { rows, failure })
}

pub fn write_table(path: &Path, t: &Table) -> Result<(), HarnessError> {
    // flattened structs need the header written by hand
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "level",
        "value",
        "dt",
        "m",
        "n",
        "eps",
        "steps",
        "status",
        "mass_residual_max",
        "e7_slack_min_rel",
        "renorm_square_total",
        "w1_total",
        "w3_max",
        "w3_excluded",
        "rel_energy_final",
        "rr5_slack_min_rel",
        "energy_equality_defect",
        "order_mass",
        "order_renorm",
        "order_w1",
        "order_w3_excluded",
        "order_rel_energy",
        "order_energy_defect",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &t.rows {
        let m = &r.metrics;
        w.write_record([
            r.level.to_string(),
            r.value.to_string(),
            r.dt.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.eps.to_string(),
            r.steps.to_string(),
            r.status.clone(),
            m.mass_residual_max.to_string(),
            m.e7_slack_min_rel.to_string(),
            m.renorm_square_total.to_string(),
            m.w1_total.to_string(),
            m.w3_max.to_string(),
            m.w3_excluded.to_string(),
            m.rel_energy_final.to_string(),
            m.rr5_slack_min_rel.to_string(),
            m.energy_equality_defect.to_string(),
            opt(r.order_mass),
            opt(r.order_renorm),
            opt(r.order_w1),
            opt(r.order_w3_excluded),
            opt(r.order_rel_energy),
            opt(r.order_energy_defect),
        ])?;
    }
    w.flush()?;
    Ok(())
}
