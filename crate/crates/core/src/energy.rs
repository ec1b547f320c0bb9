//! Energy bookkeeping: the discrete energy inequality, the dissipative-solution
//! inequality with defect measures, weak-form residuals and defect diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::continuity::{boundary_flux_form, robin_form, transport_form};
use crate::domain::{contract2, sym2, Mat2, Space, Vec2};
use crate::eos::PressureLaw;
use crate::error::{domain, Result};
use crate::math::{fabs, sqrt};
use crate::momentum::{DiscreteState, Model, StepRecord, TestField, Trajectory};
use crate::tensor::SymMatrix;

/// Σ w [½ρ|u − u_B|² + P(ρ)].
pub fn total_energy(model: &Model, state: &DiscreteState) -> f64 {
    let dom = &model.space.domain;
    let v = model.space.v_nodes(&state.c);
    (0..dom.node_count())
        .map(|k| {
            let r = state.rho[k];
            dom.weights[k] * (0.5 * r * (v[k][0] * v[k][0] + v[k][1] * v[k][1]) + model.law.pot(r))
        })
        .sum()
}

/// Every term of the discrete energy balance over one step. All time
/// integrals are already multiplied by dt.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t0: f64,
    pub t1: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// dt Σ w 𝕊:𝔻u
    pub stress_work: f64,
    /// dt Σ w [F(𝔻u) + F*(𝕊)] on the Fenchel–Young sample, rescaled to the grid.
    pub dissipation_fy: f64,
    /// Largest F + F* − 𝕊:𝔻 over the sampled nodes.
    pub fy_gap: f64,
    /// Set when F* could not be evaluated at a sampled node.
    pub fy_flag: Option<String>,
    /// dt Σ_Γout P(ρ) u_B·n
    pub outflow_potential: f64,
    /// −dt Σ_Γin E_P(ρ_B|ρ) u_B·n
    pub inflow_relative: f64,
    /// dt ε Σ_faces (|f|/h) Δρ ΔP'(ρ)
    pub eps_diffusion: f64,
    /// −dt Σ_faces F_f ⟨v⟩·Δu_B
    pub convective: f64,
    /// −dt [Σ_∂ p(ρ) u_B·n − Σ_faces ρ_f Δ P'(ρ) (u_B·n)_f |f|]
    pub pressure_div: f64,
    /// dt Σ w 𝕊:∇u_B
    pub stress_grad_ub: f64,
    /// −dt Σ_Γin P(ρ_B) u_B·n
    pub inflow_potential: f64,
    /// dt ε Σ_faces (|f|/h) Δρ ⟨u_B⟩·Δv
    pub eps_coupling: f64,
    /// dt Σ w [f·v + g(P'(ρ) − ½|v|² − u_B·v)]
    pub source_work: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// ½ Σ w ρ|Δv|² + Σ w E_P(ρ|ρ⁺): the dissipation of implicit Euler.
    pub numerical_dissipation: f64,
    /// dt Σ_faces ρ_f ΔP' ((v_transport − v⁺)·n)_f |f|
    pub picard_term: f64,
    /// slack − (numerical dissipation − picard term), zero up to solver tolerances.
    pub identity_defect: f64,
    pub scale: f64,
}

const FY_SAMPLES: usize = 100;

/// Evaluates the energy balance over one accepted step.
pub fn e7_interval(model: &Model, prev: &DiscreteState, step: &StepRecord) -> EnergyReport {
    let sp = &model.space;
    let dom = &sp.domain;
    let law = &model.law;
    let dt = step.dt;
    let eps = model.eps;
    let next = &step.state;
    let rho = &next.rho;
    let n = dom.node_count();
    let v0 = sp.v_nodes(&prev.c);
    let v1 = sp.v_nodes(&next.c);
    let flux = sp.face_flux(&step.c_transport);
    let grad_u = sp.grad_u_nodes(&next.c);
    let ub = &sp.bc.ub_nodes;
    let gub = &sp.bc.grad_ub_nodes;
    let src = model.sources_at(next.t);

    let dpot: Vec<f64> = rho.iter().map(|r| law.dpot(*r)).collect();
    let mut stress_work = 0.0;
    let mut stress_grad_ub = 0.0;
    let mut numdiss = 0.0;
    let mut source_work = 0.0;
    let mut stresses = Vec::with_capacity(n);
    for k in 0..n {
        let w = dom.weights[k];
        let dsym = sym2(&grad_u[k]);
        let s = model.potential.subdifferential(&dsym);
        stress_work += dt * w * s.ddot(&dsym);
        stress_grad_ub += dt * w * contract2(&s, &gub[k]);
        let dv = [v1[k][0] - v0[k][0], v1[k][1] - v0[k][1]];
        numdiss += w * (0.5 * prev.rho[k] * (dv[0] * dv[0] + dv[1] * dv[1]) + law.bregman(prev.rho[k], rho[k]));
        if let Some(s) = &src {
            let v = v1[k];
            let f = s.f[k];
            let chi = dpot[k] - 0.5 * (v[0] * v[0] + v[1] * v[1]) - (ub[k][0] * v[0] + ub[k][1] * v[1]);
            source_work += dt * w * (f[0] * v[0] + f[1] * v[1] + s.g[k] * chi);
        }
        stresses.push((dsym, s));
    }

    let mut convective = 0.0;
    let mut eps_coupling = 0.0;
    let mut pressure_faces = 0.0;
    let mut picard = 0.0;
    for (fi, (f, uf)) in dom.faces.iter().zip(&flux).enumerate() {
        let rf = 0.5 * (rho[f.a] + rho[f.b]);
        let ff = rf * uf * f.len;
        let vbar = [0.5 * (v1[f.a][0] + v1[f.b][0]), 0.5 * (v1[f.a][1] + v1[f.b][1])];
        let dub = [ub[f.b][0] - ub[f.a][0], ub[f.b][1] - ub[f.a][1]];
        convective -= dt * ff * (vbar[0] * dub[0] + vbar[1] * dub[1]);
        let drho = rho[f.b] - rho[f.a];
        let ubbar = [0.5 * (ub[f.a][0] + ub[f.b][0]), 0.5 * (ub[f.a][1] + ub[f.b][1])];
        let dv = [v1[f.b][0] - v1[f.a][0], v1[f.b][1] - v1[f.a][1]];
        eps_coupling += dt * eps * f.len / f.dist * drho * (ubbar[0] * dv[0] + ubbar[1] * dv[1]);
        let dp = dpot[f.b] - dpot[f.a];
        let ubf = sp.bc.ub_faces[fi];
        pressure_faces += rf * dp * ubf * f.len;
        // (v_t − v⁺)·n at the midpoint is the face flux difference
        let vn_t = uf - ubf;
        let vn_1 = face_vn(sp, &next.c, fi);
        picard += dt * rf * dp * (vn_t - vn_1) * f.len;
    }

    let mut outflow = 0.0;
    let mut inflow_rel = 0.0;
    let mut inflow_pot = 0.0;
    let mut boundary_p = 0.0;
    for ((b, un), rb) in dom.boundary.iter().zip(&sp.bc.ubn).zip(&sp.bc.rho_b) {
        let r = rho[b.node];
        boundary_p += b.weight * law.p(r) * un;
        if *un > 0.0 {
            outflow += dt * b.weight * law.pot(r) * un;
        } else if *un < 0.0 {
            inflow_rel -= dt * b.weight * law.bregman(*rb, r) * un;
            inflow_pot -= dt * b.weight * law.pot(*rb) * un;
        }
    }
    let pressure_div = -dt * (boundary_p - pressure_faces);
    let eps_diffusion = dt * eps * dom.dirichlet(rho, &dpot);

    let e0 = total_energy(model, prev);
    let e1 = total_energy(model, next);
    let lhs = (e1 - e0) + stress_work + outflow + inflow_rel + eps_diffusion;
    let rhs = convective + pressure_div + stress_grad_ub + inflow_pot + eps_coupling + source_work;
    let slack = rhs - lhs;

    // Fenchel–Young closure on an evenly strided node sample
    let stride = (n / FY_SAMPLES).max(1);
    let mut fy_gap: f64 = 0.0;
    let mut fy_flag = None;
    let mut fy_sum = 0.0;
    let mut fy_w = 0.0;
    for k in (0..n).step_by(stride) {
        let (d, s) = &stresses[k];
        match model.potential.conjugate(s) {
            Ok(fs) => {
                let fd = model.potential.evaluate_f(d);
                fy_gap = fy_gap.max(fd + fs - s.ddot(d));
                fy_sum += dom.weights[k] * (fd + fs);
                fy_w += dom.weights[k] * s.ddot(d);
            }
            Err(e) => {
                fy_flag.get_or_insert_with(|| format!("node {k}: {e}"));
            }
        }
    }
    let dissipation_fy = if fy_w != 0.0 && fy_flag.is_none() {
        stress_work * fy_sum / fy_w
    } else {
        stress_work
    };

    let scale = [e0, e1, stress_work, outflow, inflow_rel, eps_diffusion, convective, pressure_div, stress_grad_ub, inflow_pot, eps_coupling, source_work]
        .iter()
        .map(|v| fabs(*v))
        .fold(1e-300, f64::max);
    EnergyReport {
        t0: prev.t,
        t1: next.t,
        energy_before: e0,
        energy_after: e1,
        stress_work,
        dissipation_fy,
        fy_gap,
        fy_flag,
        outflow_potential: outflow,
        inflow_relative: inflow_rel,
        eps_diffusion,
        convective,
        pressure_div,
        stress_grad_ub,
        inflow_potential: inflow_pot,
        eps_coupling,
        source_work,
        lhs,
        rhs,
        slack,
        numerical_dissipation: numdiss,
        picard_term: picard,
        identity_defect: slack - (numdiss - picard),
        scale,
    }
}

fn face_vn(sp: &Space, c: &[f64], fi: usize) -> f64 {
    c.iter().zip(&sp.basis.face_vals).map(|(ci, fv)| ci * fv[fi]).sum()
}

pub fn evaluate_e7(model: &Model, traj: &Trajectory) -> Vec<EnergyReport> {
    traj.intervals().map(|(p, s)| e7_interval(model, p, s)).collect()
}

/// Fields at one time level for the dissipative-solution inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct W5Level {
    pub t: f64,
    pub rho: Vec<f64>,
    pub u: Vec<Vec2>,
    /// ∇u; central differences of `u` when absent.
    pub grad_u: Option<Vec<Mat2>>,
    pub stress: Vec<SymMatrix>,
    pub reynolds: Vec<SymMatrix>,
    pub energy_defect: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W5Row {
    pub t: f64,
    /// Σ w [½ρ|u − u_B|² + P(ρ)] at t.
    pub energy: f64,
    /// ∫₀ᵗ Σ w [F(𝔻u) + F*(𝕊)]
    pub dissipation: f64,
    pub outflow_potential: f64,
    pub inflow_potential: f64,
    /// Σ w 𝔈(t)
    pub energy_defect: f64,
    pub convective: f64,
    pub pressure_div: f64,
    pub stress_grad_ub: f64,
    /// ∫₀ᵗ Σ w ∇u_B:ℜ
    pub reynolds_grad_ub: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub flag: Option<String>,
}

/// Nodal gradient by central differences (one-sided on the boundary).
pub fn grad_fd(space: &Space, u: &[Vec2]) -> Vec<Mat2> {
    let dom = &space.domain;
    let m = dom.m;
    let mut out = vec![[[0.0; 2]; 2]; dom.node_count()];
    for j in 0..=m {
        for i in 0..=m {
            let k = dom.idx(i, j);
            let (il, ir) = (i.saturating_sub(1), (i + 1).min(m));
            let (jl, jr) = (j.saturating_sub(1), (j + 1).min(m));
            let hx = (ir - il) as f64 * dom.hx;
            let hy = (jr - jl) as f64 * dom.hy;
            for c in 0..2 {
                out[k][c][0] = (u[dom.idx(ir, j)][c] - u[dom.idx(il, j)][c]) / hx;
                out[k][c][1] = (u[dom.idx(i, jr)][c] - u[dom.idx(i, jl)][c]) / hy;
            }
        }
    }
    out
}

/// Cumulative dissipative-solution inequality from the first level, with the
/// right-endpoint rule in time.
pub fn evaluate_w5(space: &Space, law: &PressureLaw, potential: &crate::rheology::ViscousPotential, levels: &[W5Level]) -> Result<Vec<W5Row>> {
    let dom = &space.domain;
    let n = dom.node_count();
    for l in levels {
        if l.rho.len() != n || l.u.len() != n || l.stress.len() != n || l.reynolds.len() != n || l.energy_defect.len() != n {
            return Err(domain(format!("level at t = {} does not match the grid", l.t)));
        }
    }
    let ub = &space.bc.ub_nodes;
    let gub = &space.bc.grad_ub_nodes;
    let energy = |l: &W5Level| -> f64 {
        (0..n)
            .map(|k| {
                let v = [l.u[k][0] - ub[k][0], l.u[k][1] - ub[k][1]];
                dom.weights[k] * (0.5 * l.rho[k] * (v[0] * v[0] + v[1] * v[1]) + law.pot(l.rho[k]))
            })
            .sum()
    };
    let mut rows = Vec::with_capacity(levels.len().saturating_sub(1));
    let Some(first) = levels.first() else { return Ok(rows) };
    let e_init = energy(first);
    let (mut diss, mut outp, mut inp, mut conv, mut pdiv, mut sgub, mut rgub) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut flag: Option<String> = None;
    for w in levels.windows(2) {
        let l = &w[1];
        let dt = l.t - w[0].t;
        let g = match &l.grad_u {
            Some(g) => g.clone(),
            None => grad_fd(space, &l.u),
        };
        for k in 0..n {
            let wk = dom.weights[k] * dt;
            let d = sym2(&g[k]);
            let s = &l.stress[k];
            match potential.conjugate(s) {
                Ok(fs) => diss += wk * (potential.evaluate_f(&d) + fs),
                Err(e) => {
                    flag.get_or_insert_with(|| format!("t = {}, node {k}: {e}", l.t));
                    diss += wk * s.ddot(&d);
                }
            }
            let v = [l.u[k][0] - ub[k][0], l.u[k][1] - ub[k][1]];
            let gu = &gub[k];
            let gu_u = [gu[0][0] * l.u[k][0] + gu[0][1] * l.u[k][1], gu[1][0] * l.u[k][0] + gu[1][1] * l.u[k][1]];
            conv -= wk * l.rho[k] * (v[0] * gu_u[0] + v[1] * gu_u[1]);
            pdiv -= wk * law.p(l.rho[k]) * (gu[0][0] + gu[1][1]);
            sgub += wk * contract2(s, gu);
            rgub += wk * contract2(&l.reynolds[k], gu);
        }
        for ((b, un), rb) in dom.boundary.iter().zip(&space.bc.ubn).zip(&space.bc.rho_b) {
            if *un > 0.0 {
                outp += dt * b.weight * law.pot(l.rho[b.node]) * un;
            } else if *un < 0.0 {
                inp += dt * b.weight * law.pot(*rb) * un;
            }
        }
        let e = energy(l);
        let edef = dom.integrate(&l.energy_defect);
        let lhs = (e - e_init) + diss + outp + inp + edef;
        let rhs = conv + pdiv + sgub - rgub;
        rows.push(W5Row {
            t: l.t,
            energy: e,
            dissipation: diss,
            outflow_potential: outp,
            inflow_potential: inp,
            energy_defect: edef,
            convective: conv,
            pressure_div: pdiv,
            stress_grad_ub: sgub,
            reynolds_grad_ub: rgub,
            lhs,
            rhs,
            slack: rhs - lhs,
            flag: flag.clone(),
        });
    }
    Ok(rows)
}

/// W5 levels of a computed trajectory with zero defects.
pub fn w5_levels(model: &Model, traj: &Trajectory) -> Vec<W5Level> {
    let n = model.space.domain.node_count();
    let d = SymMatrix::zeros(2);
    traj.states()
        .map(|s| W5Level {
            t: s.t,
            rho: s.rho.clone(),
            u: model.space.u_nodes(&s.c),
            grad_u: Some(model.space.grad_u_nodes(&s.c)),
            stress: model.stress_nodes(&s.c),
            reynolds: vec![d; n],
            energy_defect: vec![0.0; n],
        })
        .collect()
}

/// Continuity weak-form residual per step for a test function φ(t, x, y):
/// [Σ wρφ] + dt Σ_Γout φρu_B·n + dt Σ_Γin φρ_B u_B·n − Σ wρ(φ⁺ − φ) − dt C(φ⁺) − dt Σ w g φ⁺.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Row {
    pub t: f64,
    pub residual: f64,
    /// −dt ε K(ρ, φ), which the residual equals.
    pub eps_pairing: f64,
}

pub fn weak_residual_continuity<F: Fn(f64, f64, f64) -> f64>(model: &Model, traj: &Trajectory, phi: F) -> Vec<W1Row> {
    let sp = &model.space;
    let dom = &sp.domain;
    let n = dom.node_count();
    traj.intervals()
        .map(|(prev, step)| {
            let next = &step.state;
            let p0: Vec<f64> = (0..n).map(|k| { let [x, y] = dom.coords(k); phi(prev.t, x, y) }).collect();
            let p1: Vec<f64> = (0..n).map(|k| { let [x, y] = dom.coords(k); phi(next.t, x, y) }).collect();
            let flux = sp.face_flux(&step.c_transport);
            let mut r = 0.0;
            for k in 0..n {
                r += dom.weights[k] * (next.rho[k] * p1[k] - prev.rho[k] * p0[k] - prev.rho[k] * (p1[k] - p0[k]));
            }
            let bdry = boundary_flux_form(sp, &next.rho, &p1) - robin_form(sp, &next.rho, &p1);
            r += step.dt * bdry - step.dt * transport_form(sp, &next.rho, &flux, &p1);
            if let Some(s) = model.sources_at(next.t) {
                r -= step.dt * (0..n).map(|k| dom.weights[k] * s.g[k] * p1[k]).sum::<f64>();
            }
            W1Row { t: next.t, residual: r, eps_pairing: -step.dt * model.eps * dom.dirichlet(&next.rho, &p1) }
        })
        .collect()
}

/// Momentum weak-form residual per step against a fixed test field, with the
/// magnitude scale of the pairing.
pub fn weak_residual_momentum(model: &Model, traj: &Trajectory, field: &TestField) -> Vec<(f64, f64)> {
    traj.intervals()
        .map(|(prev, step)| {
            let flux = model.space.face_flux(&step.c_transport);
            let src = model.sources_at(step.state.t);
            model
                .functional(prev, &step.state.rho, &step.state.c, &flux, step.dt, src.as_ref())
                .apply(field)
        })
        .collect()
}

/// Pointwise defect proxies: ℜ (tensor) and 𝔈 (scalar) per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    pub reynolds: Vec<SymMatrix>,
    pub energy_defect: Vec<f64>,
    pub d_lower: f64,
    pub d_upper: f64,
}

impl DefectReport {
    pub fn trace(&self) -> Vec<f64> {
        self.reynolds.iter().map(|r| r.trace()).collect()
    }
}

/// Defects of the two-point mixture θδ_{ρ₁} + (1−θ)δ_{ρ₂}:
/// ℜ = (p̄ − p(ρ̄)) I and 𝔈 = P̄ − P(ρ̄).
pub fn mixture_defects(law: &PressureLaw, dim: usize, rho1: &[f64], rho2: &[f64], theta: f64) -> Result<DefectReport> {
    if rho1.len() != rho2.len() || !(0.0..=1.0).contains(&theta) {
        return Err(domain("mixture needs equal lengths and theta in [0, 1]"));
    }
    let mut reynolds = Vec::with_capacity(rho1.len());
    let mut energy_defect = Vec::with_capacity(rho1.len());
    for (a, b) in rho1.iter().zip(rho2) {
        let bar = theta * a + (1.0 - theta) * b;
        let pd = theta * law.p(*a) + (1.0 - theta) * law.p(*b) - law.p(bar);
        let ed = theta * law.pot(*a) + (1.0 - theta) * law.pot(*b) - law.pot(bar);
        reynolds.push(SymMatrix::identity(dim) * pd);
        energy_defect.push(ed);
    }
    let (d_lower, d_upper) = law.compatibility_constants(dim);
    Ok(DefectReport { reynolds, energy_defect, d_lower, d_upper })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityCheck {
    pub pass: bool,
    /// Smallest and largest tr ℜ / 𝔈 over nodes with 𝔈 > 0.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Largest violation of d̲𝔈 ≤ tr ℜ ≤ d̄𝔈.
    pub worst: f64,
}

pub fn check_compatibility(rep: &DefectReport, tol: f64) -> CompatibilityCheck {
    let mut worst: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, e) in rep.reynolds.iter().zip(&rep.energy_defect) {
        let tr = r.trace();
        worst = worst.max(rep.d_lower * e - tr).max(tr - rep.d_upper * e).max(-e);
        if *e > 0.0 {
            lo = lo.min(tr / e);
            hi = hi.max(tr / e);
        }
    }
    CompatibilityCheck { pass: worst <= tol, ratio_min: lo, ratio_max: hi, worst }
}

/// Checks 𝔈 ≤ (ā/d) tr ℜ ≤ (ā/a̲) 𝔈 and returns the largest violation.
pub fn e27_chain(law: &PressureLaw, rep: &DefectReport, dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, e) in rep.reynolds.iter().zip(&rep.energy_defect) {
        let mid = law.a_upper / dim as f64 * r.trace();
        worst = worst.max(e - mid).max(mid - law.a_upper / law.a_lower * e);
    }
    worst
}

/// min over nodes and random unit directions ξ of ξᵀℜξ.
pub fn psd_margin(reynolds: &[SymMatrix], directions: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = reynolds.first().map_or(2, |r| r.d);
    let mut worst = f64::INFINITY;
    let mut drawn = 0;
    while drawn < directions {
        let mut xi = [0.0; 3];
        for x in xi.iter_mut().take(d) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let nrm = sqrt(xi.iter().map(|v| v * v).sum());
        if nrm > 1.0 || nrm < 1e-3 {
            continue;
        }
        drawn += 1;
        for v in xi.iter_mut() {
            *v /= nrm;
        }
        for r in reynolds {
            worst = worst.min(r.quad(&xi[..r.d]));
        }
    }
    worst
}

/// |m·ξ|²/ρ for ρ > 0; 0 at (0, 0); +∞ otherwise.
pub fn kinetic_energy_lsc(rho: f64, m: &[f64], xi: &[f64]) -> f64 {
    let mx: f64 = m.iter().zip(xi).map(|(a, b)| a * b).sum();
    if rho > 0.0 {
        mx * mx / rho
    } else if rho == 0.0 && m.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        f64::INFINITY
    }
}
