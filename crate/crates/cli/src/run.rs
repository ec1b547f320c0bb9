//! One scenario run: advance, evaluate monitors, write artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use viscflow_core::continuity::{mass_ledger, max_principle, min_principle, parabolic_monitor, renormalized_defect};
use viscflow_core::domain::{BoundaryClass, Mode};
use viscflow_core::energy::{
    evaluate_e7, evaluate_w5, total_energy, w5_levels, weak_residual_continuity, weak_residual_momentum, EnergyReport,
    W5Row,
};
use viscflow_core::momentum::{TestField, Trajectory};
use viscflow_core::relative_energy::{gronwall_monitor, lipschitz_constant, rel_energy, rr5_terms, Rr5Report};
use viscflow_core::Error as CoreError;

use crate::scenario::{Built, Monitor, Scenario};
use crate::{HarnessError, EXIT_OK, EXIT_REJECTED};

pub const SLACK_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-10;
pub const RENORM_TOL: f64 = 1e-12;
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

fn verdict(pass: bool, value: f64, detail: impl Into<String>) -> Verdict {
    Verdict { pass, value, detail: detail.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub mass_initial: f64,
    pub mass_final: f64,
    pub inflow_flux: f64,
    pub outflow_flux: f64,
    pub source_mass: f64,
    pub kinetic_initial: f64,
    pub kinetic_final: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub stress_work: f64,
    /// Σ (energy balance left − right) over the accepted steps.
    pub energy_equality_defect: f64,
    pub max_picard_iterations: usize,
    pub relative_energy_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub status: String,
    pub exit_code: i32,
    pub steps_requested: usize,
    pub steps_accepted: usize,
    pub t_reached: f64,
    pub failure: Option<String>,
    pub suggested_dt: Option<f64>,
    pub totals: Totals,
    pub monitors: BTreeMap<String, Verdict>,
    /// Requested monitors that do not apply to this scenario.
    pub skipped: Vec<String>,
    pub all_pass: bool,
}

/// Scalar measurements used by refinement tables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub mass_residual_max: f64,
    pub e7_slack_min_rel: f64,
    pub renorm_square_total: f64,
    pub w1_total: f64,
    pub w3_max: f64,
    pub w3_excluded: f64,
    pub rel_energy_final: f64,
    pub rr5_slack_min_rel: f64,
    pub energy_equality_defect: f64,
}

pub struct RunOutput {
    pub summary: Summary,
    pub metrics: Metrics,
    pub trajectory: Trajectory,
    pub e7: Vec<EnergyReport>,
    pub rr5: Vec<Rr5Report>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write artifacts here; nothing is written when None.
    pub out: Option<PathBuf>,
    /// Extra mode outside X_n at which the momentum residual is measured.
    pub excluded_mode: Option<Mode>,
}

pub fn run(scn: &Scenario, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let built = scn.build()?;
    let nm = &scn.numerics;
    let traj = built
        .model
        .advance(built.initial.clone(), nm.t_final, nm.dt)
        .map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let steps_requested = (nm.t_final / nm.dt).round() as usize;
    let mut out = evaluate(scn, &built, traj, opts)?;
    out.summary.steps_requested = steps_requested;
    if let Some(dir) = &opts.out {
        out.files = write_artifacts(dir, scn, &built, &out)?;
    }
    Ok(out)
}

fn w1_test(l1: f64, l2: f64) -> impl Fn(f64, f64, f64) -> f64 {
    let (a, b) = (std::f64::consts::PI / l1, std::f64::consts::PI / l2);
    move |_, x, y| (a * x).cos() + (b * y).cos()
}

pub fn mode_field(space: &viscflow_core::domain::Space, m: Mode) -> Result<TestField, HarnessError> {
    let d = &space.domain;
    let (l1, l2) = (d.l1, d.l2);
    let c = 2.0 / (l1 * l2).sqrt();
    let pi = std::f64::consts::PI;
    TestField::from_fn(space, |x, y| {
        let s = c * (m.k1 as f64 * pi * x / l1).sin() * (m.k2 as f64 * pi * y / l2).sin();
        let mut v = [0.0; 2];
        v[m.comp] = s;
        v
    })
    .map_err(|e| HarnessError::Invalid(e.to_string()))
}

fn evaluate(scn: &Scenario, built: &Built, traj: Trajectory, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let model = &built.model;
    let sp = &model.space;
    let dom = &sp.domain;
    let mut monitors = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut metrics = Metrics::default();
    let mut totals = Totals {
        mass_initial: dom.integrate(&traj.initial.rho),
        mass_final: dom.integrate(&traj.last().rho),
        inflow_flux: 0.0,
        outflow_flux: 0.0,
        source_mass: 0.0,
        kinetic_initial: kinetic(built, &traj.initial),
        kinetic_final: kinetic(built, traj.last()),
        energy_initial: total_energy(model, &traj.initial),
        energy_final: total_energy(model, traj.last()),
        stress_work: 0.0,
        energy_equality_defect: 0.0,
        max_picard_iterations: traj.steps.iter().map(|s| s.iterations).max().unwrap_or(0),
        relative_energy_final: None,
    };

    // mass ledger and renormalization share the per-step sources
    let mut mass_worst = 0.0f64;
    let mut renorm_worst = 0.0f64;
    let mut renorm_sq = 0.0;
    for (p, s) in traj.intervals() {
        let g = model.sources_at(s.state.t).map(|x| x.g);
        let l = mass_ledger(sp, &p.rho, &s.state.rho, s.dt, g.as_deref());
        totals.inflow_flux += l.inflow;
        totals.outflow_flux += l.outflow;
        totals.source_mass += l.source;
        mass_worst = mass_worst.max(l.relative());
        if scn.wants(Monitor::Renormalization) {
            let flux = sp.face_flux(&s.c_transport);
            let lin = |r: f64| (r, 1.0, 0.0);
            let sq = |r: f64| (r * r, 2.0 * r, 2.0);
            let d = renormalized_defect(sp, &p.rho, &s.state.rho, &flux, model.eps, s.dt, g.as_deref(), &lin, (0.0, 0.0));
            renorm_worst = renorm_worst.max((d - l.residual).abs() / l.scale.max(f64::MIN_POSITIVE));
            renorm_sq += renormalized_defect(sp, &p.rho, &s.state.rho, &flux, model.eps, s.dt, g.as_deref(), &sq, (0.0, 0.0)).abs();
        }
    }
    metrics.mass_residual_max = mass_worst;
    metrics.renorm_square_total = renorm_sq;
    if scn.wants(Monitor::Mass) {
        monitors.insert("mass".into(), verdict(mass_worst <= MASS_TOL, mass_worst, "max relative per-step ledger residual"));
    }
    if scn.wants(Monitor::Renormalization) {
        monitors.insert(
            "renormalization".into(),
            verdict(renorm_worst <= RENORM_TOL, renorm_worst, format!("B(r)=r against the ledger; B(r)=r^2 total {renorm_sq:e}")),
        );
    }

    if scn.wants(Monitor::Extrema) {
        let recs = model.extrema_records(&traj);
        let mut dmax = traj.initial.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut dmin = traj.initial.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        for (c, r) in sp.bc.class.iter().zip(&sp.bc.rho_b) {
            if *c == BoundaryClass::Inflow {
                dmax = dmax.max(*r);
                dmin = dmin.min(*r);
            }
        }
        let hi = max_principle(&recs, dmax, SLACK_TOL);
        let lo = min_principle(&recs, dmin, SLACK_TOL);
        let m = if recs.is_empty() { 0.0 } else { hi.margin.min(lo.margin) };
        monitors.insert(
            "extrema".into(),
            verdict(hi.pass && lo.pass, m, format!("upper margin {:e}, lower margin {:e}", hi.margin, lo.margin)),
        );
    }

    let e7 = if scn.wants(Monitor::Energy) || scn.wants(Monitor::FenchelYoung) {
        evaluate_e7(model, &traj)
    } else {
        Vec::new()
    };
    if !e7.is_empty() || traj.steps.is_empty() {
        let mut worst = if e7.is_empty() { 0.0 } else { f64::INFINITY };
        let mut monotone = true;
        let mut fy = None;
        for r in &e7 {
            totals.stress_work += r.stress_work;
            totals.energy_equality_defect += r.slack;
            worst = worst.min(r.slack / r.scale.max(f64::MIN_POSITIVE));
            monotone &= r.energy_after <= r.energy_before + 1e-12 * r.scale;
            if fy.is_none() {
                fy.clone_from(&r.fy_flag);
            }
        }
        metrics.e7_slack_min_rel = worst;
        metrics.energy_equality_defect = totals.energy_equality_defect;
        if scn.wants(Monitor::Energy) {
            let closed = sp.bc.is_closed() && model.sources.is_none();
            let pass = worst >= -SLACK_TOL && (!closed || monotone);
            let detail = if closed { format!("closed box, monotone: {monotone}") } else { "open or forced".to_string() };
            monitors.insert("energy".into(), verdict(pass, worst, format!("min slack/scale; {detail}")));
        }
        if scn.wants(Monitor::FenchelYoung) {
            let gap = e7.iter().map(|r| r.fy_gap).fold(0.0, f64::max);
            monitors.insert("fenchel_young".into(), verdict(fy.is_none(), gap, fy.unwrap_or_else(|| "max sampled gap".into())));
        }
    }

    if scn.wants(Monitor::W1) {
        let rows = weak_residual_continuity(model, &traj, w1_test(dom.l1, dom.l2));
        let mut tot = 0.0;
        let mut worst = 0.0f64;
        for r in &rows {
            tot += r.residual.abs();
            worst = worst.max((r.residual - r.eps_pairing).abs());
        }
        metrics.w1_total = tot;
        monitors.insert("w1".into(), verdict(worst <= 1e-10, tot, format!("sum |residual|; residual minus eps pairing {worst:e}")));
    }

    if scn.wants(Monitor::W3) {
        let mut worst = 0.0f64;
        for j in 0..sp.n() {
            let f = TestField::mode(sp, j);
            for (r, _) in weak_residual_momentum(model, &traj, &f) {
                worst = worst.max(r.abs());
            }
        }
        metrics.w3_max = worst;
        let mut detail = "max |residual| over the Galerkin modes".to_string();
        if let Some(m) = opts.excluded_mode {
            let f = mode_field(sp, m)?;
            metrics.w3_excluded = weak_residual_momentum(model, &traj, &f).iter().map(|v| v.0.abs()).sum();
            detail.push_str(&format!("; excluded mode ({}, {}, {}) {:e}", m.k1, m.k2, m.comp, metrics.w3_excluded));
        }
        monitors.insert("w3".into(), verdict(worst <= ORTHO_TOL, worst, detail));
    }

    if scn.wants(Monitor::W5) && model.sources.is_some() {
        skipped.push("w5: the dissipative inequality has no source terms".to_string());
    } else if scn.wants(Monitor::W5) {
        let rows = evaluate_w5(sp, &model.law, &model.potential, &w5_levels(model, &traj))
            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
        let (pass, worst, flag) = w5_verdict(&rows);
        monitors.insert("w5".into(), verdict(pass, worst, flag.unwrap_or_else(|| "min slack/scale".into())));
    }

    let mut rr5 = Vec::new();
    if built.reference.is_none() && scn.wants(Monitor::Relative) {
        skipped.push("relative: no reference solution".to_string());
    }
    if let (Some(s), true) = (&built.reference, scn.wants(Monitor::Relative)) {
        rr5 = rr5_terms(model, &traj, s.as_ref()).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        let times: Vec<f64> = traj.states().map(|s| s.t).collect();
        let c = lipschitz_constant(sp, &model.law, s.as_ref(), &times);
        let g = gronwall_monitor(&rr5, c, 1e-12);
        let worst = rr5.iter().map(|r| r.slack / r.scale.max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
        let fin = rel_energy(model, traj.last(), s.as_ref());
        totals.relative_energy_final = Some(fin);
        metrics.rel_energy_final = fin;
        metrics.rr5_slack_min_rel = if rr5.is_empty() { 0.0 } else { worst };
        monitors.insert(
            "relative".into(),
            verdict(
                g.pass && worst >= -SLACK_TOL,
                fin,
                format!("final relative energy; min slack/scale {worst:e}; envelope margin {:e}", g.margin),
            ),
        );
    }

    if scn.wants(Monitor::Parabolic) {
        let rhos: Vec<&[f64]> = traj.states().map(|s| s.rho.as_slice()).collect();
        let pm = parabolic_monitor(sp, &rhos, scn.numerics.dt, model.eps);
        let fin = pm.dt_rho_sq.is_finite() && pm.eps_grad_sup.is_finite();
        monitors.insert(
            "parabolic".into(),
            verdict(fin, pm.eps_grad_sup, format!("sup eps|grad rho|^2 integral; dt rho^2 integral {:e}", pm.dt_rho_sq)),
        );
    }

    let (status, exit_code, failure, suggested_dt) = match &traj.failure {
        None => ("ok", EXIT_OK, None, None),
        Some(e) => {
            let dt = if let CoreError::StepRejected { suggested_dt, .. } = e { Some(*suggested_dt) } else { None };
            ("rejected", EXIT_REJECTED, Some(e.to_string()), dt)
        }
    };
    let all_pass = monitors.values().all(|v| v.pass);
    let summary = Summary {
        scenario: scn.name.clone(),
        status: status.into(),
        exit_code,
        steps_requested: 0,
        steps_accepted: traj.steps.len(),
        t_reached: traj.last().t,
        failure,
        suggested_dt,
        totals,
        monitors,
        skipped,
        all_pass,
    };
    Ok(RunOutput { summary, metrics, trajectory: traj, e7, rr5, files: Vec::new() })
}

fn w5_verdict(rows: &[W5Row]) -> (bool, f64, Option<String>) {
    let mut worst = if rows.is_empty() { 0.0 } else { f64::INFINITY };
    let mut flag = None;
    for r in rows {
        let scale = 1.0 + r.lhs.abs() + r.rhs.abs();
        worst = worst.min(r.slack / scale);
        if flag.is_none() {
            flag.clone_from(&r.flag);
        }
    }
    (flag.is_none() && worst >= -SLACK_TOL, worst, flag)
}

fn kinetic(built: &Built, s: &viscflow_core::momentum::DiscreteState) -> f64 {
    let dom = &built.model.space.domain;
    let u = built.model.space.u_nodes(&s.c);
    (0..dom.node_count()).map(|k| dom.weights[k] * 0.5 * s.rho[k] * (u[k][0] * u[k][0] + u[k][1] * u[k][1])).sum()
}

#[derive(Serialize)]
struct TrajRow {
    step: usize,
    t: f64,
    dt: f64,
    iterations: usize,
    picard_gap: f64,
    mass: f64,
    min_rho: f64,
    max_rho: f64,
    div_inf: f64,
    kinetic_energy: f64,
    total_energy: f64,
}

#[derive(Serialize)]
struct FieldRow {
    step: usize,
    t: f64,
    node: usize,
    x1: f64,
    x2: f64,
    rho: f64,
    u1: f64,
    u2: f64,
}

#[derive(Serialize)]
struct EnergyRow<'a> {
    step: usize,
    t0: f64,
    t1: f64,
    energy_before: f64,
    energy_after: f64,
    stress_work: f64,
    dissipation_fy: f64,
    fy_gap: f64,
    outflow_potential: f64,
    inflow_relative: f64,
    eps_diffusion: f64,
    convective: f64,
    pressure_div: f64,
    stress_grad_ub: f64,
    inflow_potential: f64,
    eps_coupling: f64,
    source_work: f64,
    lhs: f64,
    rhs: f64,
    slack: f64,
    numerical_dissipation: f64,
    picard_term: f64,
    identity_defect: f64,
    scale: f64,
    fy_flag: &'a str,
}

#[derive(Serialize)]
struct LedgerRow {
    step: usize,
    t: f64,
    mass_before: f64,
    mass_after: f64,
    outflow: f64,
    inflow: f64,
    source: f64,
    residual: f64,
    relative: f64,
}

#[derive(Serialize)]
struct W5Out<'a> {
    t: f64,
    energy: f64,
    dissipation: f64,
    outflow_potential: f64,
    inflow_potential: f64,
    energy_defect: f64,
    convective: f64,
    pressure_div: f64,
    stress_grad_ub: f64,
    reynolds_grad_ub: f64,
    lhs: f64,
    rhs: f64,
    slack: f64,
    flag: &'a str,
}

#[derive(Serialize)]
struct RelRow {
    step: usize,
    t0: f64,
    t1: f64,
    rel_before: f64,
    rel_after: f64,
    stress_work: f64,
    stress_grad_tilde: f64,
    outflow_bregman: f64,
    inflow_bregman: f64,
    lhs: f64,
    rhs: f64,
    slack: f64,
    numerical_dissipation: f64,
    identity_defect: f64,
    t_quadratic: f64,
    t_pressure: f64,
    t_momentum: f64,
    t_mass: f64,
    t_defect: f64,
    level_i_remainder: f64,
    credit: f64,
    envelope: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_w5_csv(path: &Path, rows: &[W5Row]) -> Result<(), HarnessError> {
    write_csv(
        path,
        rows.iter().map(|r| W5Out {
            t: r.t,
            energy: r.energy,
            dissipation: r.dissipation,
            outflow_potential: r.outflow_potential,
            inflow_potential: r.inflow_potential,
            energy_defect: r.energy_defect,
            convective: r.convective,
            pressure_div: r.pressure_div,
            stress_grad_ub: r.stress_grad_ub,
            reynolds_grad_ub: r.reynolds_grad_ub,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            flag: r.flag.as_deref().unwrap_or(""),
        }),
    )
}

fn write_artifacts(dir: &Path, scn: &Scenario, built: &Built, out: &RunOutput) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let model = &built.model;
    let sp = &model.space;
    let dom = &sp.domain;
    let traj = &out.trajectory;
    let mut files = Vec::new();

    let p = dir.join("trajectory.csv");
    let mut rows = Vec::new();
    let mut prev_div = 0.0;
    for (k, s) in traj.states().enumerate() {
        let (dt, it, gap) = if k == 0 {
            (0.0, 0, 0.0)
        } else {
            let st = &traj.steps[k - 1];
            prev_div = sp.div_inf(&st.c_transport);
            (st.dt, st.iterations, st.picard_gap)
        };
        rows.push(TrajRow {
            step: k,
            t: s.t,
            dt,
            iterations: it,
            picard_gap: gap,
            mass: dom.integrate(&s.rho),
            min_rho: s.rho.iter().cloned().fold(f64::INFINITY, f64::min),
            max_rho: s.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            div_inf: if k == 0 { 0.0 } else { prev_div },
            kinetic_energy: kinetic(built, s),
            total_energy: total_energy(model, s),
        });
    }
    write_csv(&p, rows)?;
    files.push(p);

    let p = dir.join("fields.csv");
    let mut rows = Vec::new();
    for (k, s) in traj.states().enumerate() {
        let u = sp.u_nodes(&s.c);
        for (i, (r, v)) in s.rho.iter().zip(&u).enumerate() {
            let [x1, x2] = dom.coords(i);
            rows.push(FieldRow { step: k, t: s.t, node: i, x1, x2, rho: *r, u1: v[0], u2: v[1] });
        }
    }
    write_csv(&p, rows)?;
    files.push(p);

    let p = dir.join("ledger.csv");
    let rows = traj.intervals().enumerate().map(|(k, (a, s))| {
        let g = model.sources_at(s.state.t).map(|x| x.g);
        let l = mass_ledger(sp, &a.rho, &s.state.rho, s.dt, g.as_deref());
        LedgerRow {
            step: k + 1,
            t: s.state.t,
            mass_before: l.mass_before,
            mass_after: l.mass_after,
            outflow: l.outflow,
            inflow: l.inflow,
            source: l.source,
            residual: l.residual,
            relative: l.relative(),
        }
    });
    write_csv(&p, rows)?;
    files.push(p);

    if !out.e7.is_empty() || traj.steps.is_empty() {
        let p = dir.join("energy.csv");
        let rows = out.e7.iter().enumerate().map(|(k, r)| EnergyRow {
            step: k + 1,
            t0: r.t0,
            t1: r.t1,
            energy_before: r.energy_before,
            energy_after: r.energy_after,
            stress_work: r.stress_work,
            dissipation_fy: r.dissipation_fy,
            fy_gap: r.fy_gap,
            outflow_potential: r.outflow_potential,
            inflow_relative: r.inflow_relative,
            eps_diffusion: r.eps_diffusion,
            convective: r.convective,
            pressure_div: r.pressure_div,
            stress_grad_ub: r.stress_grad_ub,
            inflow_potential: r.inflow_potential,
            eps_coupling: r.eps_coupling,
            source_work: r.source_work,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            numerical_dissipation: r.numerical_dissipation,
            picard_term: r.picard_term,
            identity_defect: r.identity_defect,
            scale: r.scale,
            fy_flag: r.fy_flag.as_deref().unwrap_or(""),
        });
        write_csv(&p, rows)?;
        files.push(p);
    }

    if scn.wants(Monitor::W5) && model.sources.is_none() {
        let p = dir.join("w5.csv");
        let rows = evaluate_w5(sp, &model.law, &model.potential, &w5_levels(model, traj))
            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
        write_w5_csv(&p, &rows)?;
        files.push(p);
    }

    if built.reference.is_some() && scn.wants(Monitor::Relative) {
        let p = dir.join("relative.csv");
        let s = built.reference.as_ref().expect("checked");
        let times: Vec<f64> = traj.states().map(|s| s.t).collect();
        let c = lipschitz_constant(sp, &model.law, s.as_ref(), &times);
        let g = gronwall_monitor(&out.rr5, c, 1e-12);
        let rows = out.rr5.iter().enumerate().map(|(k, r)| RelRow {
            step: k + 1,
            t0: r.t0,
            t1: r.t1,
            rel_before: r.rel_before,
            rel_after: r.rel_after,
            stress_work: r.stress_work,
            stress_grad_tilde: r.stress_grad_tilde,
            outflow_bregman: r.outflow_bregman,
            inflow_bregman: r.inflow_bregman,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            numerical_dissipation: r.numerical_dissipation,
            identity_defect: r.identity_defect,
            t_quadratic: r.t_quadratic,
            t_pressure: r.t_pressure,
            t_momentum: r.t_momentum,
            t_mass: r.t_mass,
            t_defect: r.t_defect,
            level_i_remainder: r.level_i_remainder,
            credit: r.credit,
            envelope: g.envelope[k + 1],
        });
        write_csv(&p, rows)?;
        files.push(p);
    }

    let p = dir.join("scenario.json");
    fs::write(&p, serde_json::to_string_pretty(scn)? + "\n")?;
    files.push(p);
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&out.summary)? + "\n")?;
    files.push(p);
    Ok(files)
}
