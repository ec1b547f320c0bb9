//! Dissipative-solution energy audit of externally supplied fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use viscflow_core::domain::{BoundaryData, Domain, Mat2, Space, Vec2};
use viscflow_core::energy::{evaluate_w5, W5Level, W5Row};
use viscflow_core::tensor::SymMatrix;

use crate::expr::Expr;
use crate::run::SLACK_TOL;
use crate::scenario::{BoundarySpec, EosSpec, PotentialSpec};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditGrid {
    pub l1: f64,
    pub l2: f64,
    /// Cells per axis; arrays hold (m+1)² nodes, x fastest.
    pub m: usize,
}

/// Symmetric 2×2 matrices are stored as [a11, a12, a22].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditLevel {
    pub t: f64,
    pub rho: Vec<f64>,
    pub u: Vec<Vec2>,
    #[serde(default)]
    pub grad_u: Option<Vec<Mat2>>,
    pub stress: Vec<[f64; 3]>,
    #[serde(default)]
    pub reynolds: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub energy_defect: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditFile {
    pub grid: AuditGrid,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub eos: EosSpec,
    pub potential: PotentialSpec,
    pub levels: Vec<AuditLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub levels: usize,
    pub pass: bool,
    pub min_slack_rel: f64,
    pub flag: Option<String>,
}

fn sym(a: &[f64; 3]) -> SymMatrix {
    SymMatrix::from_rows2(a[0], a[1], a[2])
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

pub fn audit(file: &AuditFile) -> Result<(Vec<W5Row>, AuditSummary), HarnessError> {
    let g = &file.grid;
    let dom = Domain::new(g.l1, g.l2, g.m).map_err(|e| invalid(format!("grid: {e}")))?;
    let ex = |k: &str, s: &str| Expr::parse(s).map_err(|e| invalid(format!("boundary.{k}: {e}")));
    let (u1, u2, rb) = (ex("u1", &file.boundary.u1)?, ex("u2", &file.boundary.u2)?, ex("rho", &file.boundary.rho)?);
    let bc = BoundaryData::sample(&dom, |x, y| [u1.eval(0.0, x, y), u2.eval(0.0, x, y)], |x, y| rb.eval(0.0, x, y))
        .map_err(|e| invalid(format!("boundary: {e}")))?;
    let space = Space::new(dom, 1, bc).map_err(|e| invalid(e.to_string()))?;
    let law = file.eos.build()?;
    let pot = file.potential.build()?;
    let n = space.domain.node_count();
    let levels: Vec<W5Level> = file
        .levels
        .iter()
        .map(|l| W5Level {
            t: l.t,
            rho: l.rho.clone(),
            u: l.u.clone(),
            grad_u: l.grad_u.clone(),
            stress: l.stress.iter().map(sym).collect(),
            reynolds: l.reynolds.as_ref().map_or_else(|| vec![SymMatrix::zeros(2); n], |v| v.iter().map(sym).collect()),
            energy_defect: l.energy_defect.clone().unwrap_or_else(|| vec![0.0; n]),
        })
        .collect();
    let rows = evaluate_w5(&space, &law, &pot, &levels).map_err(|e| invalid(format!("audit: {e}")))?;
    let mut worst = if rows.is_empty() { 0.0 } else { f64::INFINITY };
    let mut flag = None;
    for r in &rows {
        worst = worst.min(r.slack / (1.0 + r.lhs.abs() + r.rhs.abs()));
        if flag.is_none() {
            flag.clone_from(&r.flag);
        }
    }
    let pass = flag.is_none() && worst >= -SLACK_TOL;
    Ok((rows, AuditSummary { levels: file.levels.len(), pass, min_slack_rel: worst, flag }))
}

pub fn audit_path(input: &Path, out: &Path) -> Result<AuditSummary, HarnessError> {
    let text = std::fs::read_to_string(input)?;
    let file: AuditFile = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", input.display())))?;
    let (rows, summary) = audit(&file)?;
    std::fs::create_dir_all(out)?;
    crate::run::write_w5_csv(&out.join("w5.csv"), &rows)?;
    std::fs::write(out.join("audit.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
