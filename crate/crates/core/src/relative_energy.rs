//! Relative energy between a computed state and a smooth reference solution,
//! the itemized relative energy balance, manufactured solutions and the
//! Gronwall-type monitor.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::continuity::{boundary_flux_form, robin_form, transport_form};
use crate::domain::{sym2, Mat2, Space, Vec2};
use crate::energy::e7_interval;
use crate::eos::PressureLaw;
use crate::error::{domain, Result};
use crate::math::{cos, diff5, fabs, sin, sqrt, PI};
use crate::momentum::{DiscreteState, Model, SourceFn, StepRecord, TestField, Trajectory};
use crate::rheology::{ViscousPotential, YoungFunction};

/// A smooth reference pair (ρ̃, ũ) with ρ̃ > 0 and ũ = u_B on the boundary.
pub trait StrongSolution: Send + Sync {
    fn rho(&self, t: f64, x: Vec2) -> f64;
    fn u(&self, t: f64, x: Vec2) -> Vec2;
}

const HX: f64 = 1e-4;
const HT: f64 = 1e-4;

pub fn grad_rho<S: StrongSolution + ?Sized>(s: &S, t: f64, x: Vec2) -> Vec2 {
    [
        diff5(|z| s.rho(t, [z, x[1]]), x[0], HX),
        diff5(|z| s.rho(t, [x[0], z]), x[1], HX),
    ]
}

/// ∇ũ with entries [component][direction].
pub fn grad_u<S: StrongSolution + ?Sized>(s: &S, t: f64, x: Vec2) -> Mat2 {
    let mut g = [[0.0; 2]; 2];
    for c in 0..2 {
        g[c][0] = diff5(|z| s.u(t, [z, x[1]])[c], x[0], HX);
        g[c][1] = diff5(|z| s.u(t, [x[0], z])[c], x[1], HX);
    }
    g
}

/// Residuals of (ρ̃, ũ) in the continuity and momentum equations without the
/// viscous and ε terms: ∂ₜρ̃ + div(ρ̃ũ) and ∂ₜ(ρ̃ũ) + div(ρ̃ũ⊗ũ) + ∇p(ρ̃).
pub fn euler_residuals<S: StrongSolution + ?Sized>(s: &S, law: &PressureLaw, t: f64, x: Vec2) -> (f64, Vec2) {
    let mass = diff5(|z| s.rho(z, x), t, HT)
        + diff5(|z| s.rho(t, [z, x[1]]) * s.u(t, [z, x[1]])[0], x[0], HX)
        + diff5(|z| s.rho(t, [x[0], z]) * s.u(t, [x[0], z])[1], x[1], HX);
    let mut mom = [0.0; 2];
    for (i, mi) in mom.iter_mut().enumerate() {
        *mi = diff5(|z| s.rho(z, x) * s.u(z, x)[i], t, HT)
            + diff5(|z| { let p = [z, x[1]]; s.rho(t, p) * s.u(t, p)[i] * s.u(t, p)[0] }, x[0], HX)
            + diff5(|z| { let p = [x[0], z]; s.rho(t, p) * s.u(t, p)[i] * s.u(t, p)[1] }, x[1], HX);
    }
    mom[0] += diff5(|z| law.p(s.rho(t, [z, x[1]])), x[0], HX);
    mom[1] += diff5(|z| law.p(s.rho(t, [x[0], z])), x[1], HX);
    (mass, mom)
}

/// Sources (f̃, g̃) that make (ρ̃, ũ) an exact solution of the regularized
/// system with stress ∂F(𝔻ũ):
/// g̃ = ∂ₜρ̃ + div(ρ̃ũ) − εΔρ̃,
/// f̃ = ∂ₜ(ρ̃ũ) + div(ρ̃ũ⊗ũ) + ∇p(ρ̃) − div 𝕊̃ + ε(∇ρ̃·∇)ũ.
pub fn manufactured_sources(
    strong: Arc<dyn StrongSolution>,
    law: PressureLaw,
    potential: ViscousPotential,
    eps: f64,
) -> SourceFn {
    let h2 = 1e-3;
    Arc::new(move |t: f64, x: Vec2| {
        let s = strong.as_ref();
        let (mass, mom) = euler_residuals(s, &law, t, x);
        let lap = diff5(|z| grad_rho(s, t, [z, x[1]])[0], x[0], h2)
            + diff5(|z| grad_rho(s, t, [x[0], z])[1], x[1], h2);
        let g = mass - eps * lap;
        let stress = |p: Vec2| potential.subdifferential(&sym2(&grad_u(s, t, p)));
        let mut f = mom;
        for (i, fi) in f.iter_mut().enumerate() {
            let div_s = diff5(|z| stress([z, x[1]]).a[i][0], x[0], h2) + diff5(|z| stress([x[0], z]).a[i][1], x[1], h2);
            let gr = grad_rho(s, t, x);
            let gu = grad_u(s, t, x);
            *fi += -div_s + eps * (gr[0] * gu[i][0] + gr[1] * gu[i][1]);
        }
        (f, g)
    })
}

/// Closed-box reference on [0, L₁]×[0, L₂] built from the first sine modes:
/// ρ̃ = 1 + b cos t cos(πx/L₁) cos(πy/L₂),
/// ũ = a (1 + ½ sin t) (w₁₁ e₁ + ½ w₁₂ e₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub a: f64,
    pub b: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Manufactured {
    pub fn new(a: f64, b: f64, l1: f64, l2: f64) -> Result<Self> {
        if !(fabs(b) < 1.0) || !(l1 > 0.0) || !(l2 > 0.0) {
            return Err(domain("need |b| < 1 for a positive density and positive side lengths"));
        }
        Ok(Manufactured { a, b, l1, l2 })
    }
}

impl StrongSolution for Manufactured {
    fn rho(&self, t: f64, x: Vec2) -> f64 {
        1.0 + self.b * cos(t) * cos(PI * x[0] / self.l1) * cos(PI * x[1] / self.l2)
    }

    fn u(&self, t: f64, x: Vec2) -> Vec2 {
        let nrm = 2.0 / sqrt(self.l1 * self.l2);
        let amp = self.a * (1.0 + 0.5 * sin(t)) * nrm;
        let sx = sin(PI * x[0] / self.l1);
        [
            amp * sx * sin(PI * x[1] / self.l2),
            0.5 * amp * sx * sin(2.0 * PI * x[1] / self.l2),
        ]
    }
}

type ScalarFn = Arc<dyn Fn(f64, Vec2) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, Vec2) -> Vec2 + Send + Sync>;

/// Reference solution given by closures.
#[derive(Clone)]
pub struct ClosureSolution {
    pub rho: ScalarFn,
    pub u: VectorFn,
}

impl StrongSolution for ClosureSolution {
    fn rho(&self, t: f64, x: Vec2) -> f64 {
        (self.rho)(t, x)
    }

    fn u(&self, t: f64, x: Vec2) -> Vec2 {
        (self.u)(t, x)
    }
}

/// Checks ρ̃ > 0 at the nodes and ũ = u_B at boundary nodes over the given times.
pub fn check_strong<S: StrongSolution + ?Sized>(space: &Space, s: &S, times: &[f64]) -> Result<()> {
    let dom = &space.domain;
    for &t in times {
        for k in 0..dom.node_count() {
            let r = s.rho(t, dom.coords(k));
            if !(r > 0.0) {
                return Err(domain(format!("reference density {r} not positive at t = {t}")));
            }
        }
        for b in &dom.boundary {
            let u = s.u(t, dom.coords(b.node));
            let ub = space.bc.ub_nodes[b.node];
            let e = fabs(u[0] - ub[0]).max(fabs(u[1] - ub[1]));
            if e > 1e-10 * (1.0 + space.bc.max_ub()) {
                return Err(domain(format!("reference velocity misses u_B by {e:e} at t = {t}")));
            }
        }
    }
    Ok(())
}

/// Σ w [½ρ|u − ũ|² + E_P(ρ|ρ̃)] for nodal fields.
pub fn rel_energy_fields<S: StrongSolution + ?Sized>(space: &Space, law: &PressureLaw, rho: &[f64], u: &[Vec2], s: &S, t: f64) -> f64 {
    let dom = &space.domain;
    let mut e = 0.0;
    for k in 0..dom.node_count() {
        let x = dom.coords(k);
        let ut = s.u(t, x);
        let d = [u[k][0] - ut[0], u[k][1] - ut[1]];
        e += dom.weights[k] * (0.5 * rho[k] * (d[0] * d[0] + d[1] * d[1]) + law.bregman(rho[k], s.rho(t, x)));
    }
    e
}

pub fn rel_energy<S: StrongSolution + ?Sized>(model: &Model, state: &DiscreteState, s: &S) -> f64 {
    let u = model.space.u_nodes(&state.c);
    rel_energy_fields(&model.space, &model.law, &state.rho, &u, s, state.t)
}

/// Itemized relative energy balance over one step. Time integrals carry dt.
#[derive(Debug, Clone, PartialEq)]
pub struct Rr5Report {
    pub t0: f64,
    pub t1: f64,
    pub rel_before: f64,
    pub rel_after: f64,
    /// dt Σ w 𝕊:𝔻u
    pub stress_work: f64,
    /// dt Σ w 𝕊:∇ũ
    pub stress_grad_tilde: f64,
    /// dt Σ_Γout E_P(ρ|ρ̃) u_B·n
    pub outflow_bregman: f64,
    /// dt Σ_Γin E_P(ρ_B|ρ̃) u_B·n
    pub inflow_bregman: f64,
    pub lhs: f64,
    /// Right side assembled from the discrete balance laws.
    pub rhs: f64,
    pub slack: f64,
    pub numerical_dissipation: f64,
    /// slack − numerical dissipation; zero up to solver tolerances.
    pub identity_defect: f64,
    /// dt·(−Σ w ρ(ũ−u)·∇ũ(ũ−u))
    pub t_quadratic: f64,
    /// dt·(−Σ w [p(ρ) − p'(ρ̃)(ρ−ρ̃) − p(ρ̃)] div ũ)
    pub t_pressure: f64,
    /// dt·Σ w (ρ/ρ̃)(ũ−u)·[∂ₜ(ρ̃ũ) + div(ρ̃ũ⊗ũ) + ∇p(ρ̃)]
    pub t_momentum: f64,
    /// dt·Σ w [(ρ/ρ̃)(u−ũ)·ũ + p'(ρ̃)(1 − ρ/ρ̃)][∂ₜρ̃ + div(ρ̃ũ)]
    pub t_mass: f64,
    /// Reynolds-stress pairing; zero for computed runs.
    pub t_defect: f64,
    /// rhs − (sum of the itemized terms): what the scheme adds beyond them.
    pub level_i_remainder: f64,
    /// |rhs − t_quadratic − t_pressure − (lhs − Δℰ)|
    pub credit: f64,
    pub scale: f64,
}

pub fn rr5_interval<S: StrongSolution + ?Sized>(model: &Model, prev: &DiscreteState, step: &StepRecord, s: &S) -> Result<Rr5Report> {
    let sp = &model.space;
    let dom = &sp.domain;
    let law = &model.law;
    let dt = step.dt;
    let next = &step.state;
    let n = dom.node_count();
    check_strong(sp, s, &[prev.t, next.t])?;
    let (t0, t1) = (prev.t, next.t);
    let ub = &sp.bc.ub_nodes;
    let u0 = sp.u_nodes(&prev.c);
    let u1 = sp.u_nodes(&next.c);
    let v0 = sp.v_nodes(&prev.c);
    let flux = sp.face_flux(&step.c_transport);
    let src = model.sources_at(t1);

    let e7 = e7_interval(model, prev, step);
    let d7 = e7.lhs - (e7.energy_after - e7.energy_before);

    // R(v⁺): the Galerkin system residual at the computed coefficients
    let fun = model.functional(prev, &next.rho, &next.c, &flux, dt, src.as_ref());
    let (r_v, _) = fun.apply(&TestField::from_coeffs(sp, &next.c));

    let stress = model.stress_nodes(&next.c);
    let mut chi_hat = Vec::with_capacity(n);
    let mut mom_pair = 0.0;
    let mut shift = 0.0;
    let mut psi_pair = 0.0;
    let mut p_tilde = 0.0;
    let mut stress_grad = 0.0;
    let (mut tq, mut tp, mut tm, mut tmass) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let x = dom.coords(k);
        let w = dom.weights[k];
        let (ut0, ut1) = (s.u(t0, x), s.u(t1, x));
        let (rt0, rt1) = (s.rho(t0, x), s.rho(t1, x));
        let vt0 = [ut0[0] - ub[k][0], ut0[1] - ub[k][1]];
        let vt1 = [ut1[0] - ub[k][0], ut1[1] - ub[k][1]];
        let sq = |a: Vec2| a[0] * a[0] + a[1] * a[1];
        chi_hat.push(0.5 * (sq(ut1) - sq(ub[k])) - law.dpot(rt1));
        let (r0, r1) = (prev.rho[k], next.rho[k]);
        let dm = [r1 * u1[k][0] - r0 * u0[k][0], r1 * u1[k][1] - r0 * u0[k][1]];
        mom_pair += w * (dm[0] * vt1[0] + dm[1] * vt1[1]);
        shift += w * r0 * (v0[k][0] * (vt1[0] - vt0[0]) + v0[k][1] * (vt1[1] - vt0[1]));
        let psi0 = 0.5 * sq(vt0) - law.dpot(rt0);
        let psi1 = 0.5 * sq(vt1) - law.dpot(rt1);
        psi_pair += w * r0 * (psi1 - psi0);
        p_tilde += w * (law.p(rt1) - law.p(rt0));
        let gu = crate::relative_energy::grad_u(s, t1, x);
        stress_grad += dt * w * crate::domain::contract2(&stress[k], &gu);

        // itemized terms at the right endpoint
        let d = [ut1[0] - u1[k][0], ut1[1] - u1[k][1]];
        let gd = [gu[0][0] * d[0] + gu[0][1] * d[1], gu[1][0] * d[0] + gu[1][1] * d[1]];
        tq -= dt * w * r1 * (d[0] * gd[0] + d[1] * gd[1]);
        tp -= dt * w * law.pressure_bregman(r1, rt1) * (gu[0][0] + gu[1][1]);
        let (mass_res, mom_res) = euler_residuals(s, law, t1, x);
        let ratio = r1 / rt1;
        tm += dt * w * ratio * (d[0] * mom_res[0] + d[1] * mom_res[1]);
        tmass += dt * w * (-ratio * (d[0] * ut1[0] + d[1] * ut1[1]) + law.dp(rt1) * (1.0 - ratio)) * mass_res;
    }

    let cont = transport_form(sp, &next.rho, &flux, &chi_hat) - model.eps * dom.dirichlet(&next.rho, &chi_hat)
        - boundary_flux_form(sp, &next.rho, &chi_hat)
        + robin_form(sp, &next.rho, &chi_hat)
        + src.as_ref().map_or(0.0, |s| (0..n).map(|k| dom.weights[k] * s.g[k] * chi_hat[k]).sum());

    let (mut out_b, mut in_b) = (0.0, 0.0);
    for ((b, un), rb) in dom.boundary.iter().zip(&sp.bc.ubn).zip(&sp.bc.rho_b) {
        let rt = s.rho(t1, dom.coords(b.node));
        if *un > 0.0 {
            out_b += dt * b.weight * law.bregman(next.rho[b.node], rt) * un;
        } else if *un < 0.0 {
            in_b += dt * b.weight * law.bregman(*rb, rt) * un;
        }
    }

    let rel0 = rel_energy(model, prev, s);
    let rel1 = rel_energy(model, next, s);
    let d_rr = e7.stress_work - stress_grad + out_b + in_b;
    let lhs = (rel1 - rel0) + d_rr;
    let rhs = d_rr + e7.rhs - d7 + e7.picard_term + r_v - mom_pair + dt * cont - shift + psi_pair + p_tilde;
    let slack = rhs - lhs;
    let itemized = tq + tp + tm + tmass;
    let scale = [rel0, rel1, e7.scale, fabs(mom_pair), fabs(dt * cont), fabs(psi_pair), fabs(p_tilde)]
        .iter()
        .fold(1e-300, |a: f64, b| a.max(*b));
    Ok(Rr5Report {
        t0,
        t1,
        rel_before: rel0,
        rel_after: rel1,
        stress_work: e7.stress_work,
        stress_grad_tilde: stress_grad,
        outflow_bregman: out_b,
        inflow_bregman: in_b,
        lhs,
        rhs,
        slack,
        numerical_dissipation: e7.numerical_dissipation,
        identity_defect: slack - e7.numerical_dissipation,
        t_quadratic: tq,
        t_pressure: tp,
        t_momentum: tm,
        t_mass: tmass,
        t_defect: 0.0,
        level_i_remainder: rhs - itemized,
        credit: fabs(rhs - tq - tp - d_rr),
        scale,
    })
}

pub fn rr5_terms<S: StrongSolution + ?Sized>(model: &Model, traj: &Trajectory, s: &S) -> Result<Vec<Rr5Report>> {
    traj.intervals().map(|(p, st)| rr5_interval(model, p, st, s)).collect()
}

/// c = max(2‖∇ũ‖, ‖div ũ‖/a̲) over the nodes and the given times: the rate
/// that bounds the quadratic and pressure terms by c·ℰ.
pub fn lipschitz_constant<S: StrongSolution + ?Sized>(space: &Space, law: &PressureLaw, s: &S, times: &[f64]) -> f64 {
    let dom = &space.domain;
    let mut c: f64 = 0.0;
    for &t in times {
        for k in 0..dom.node_count() {
            let g = grad_u(s, t, dom.coords(k));
            let fro = sqrt(g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
            c = c.max(2.0 * fro).max(fabs(g[0][0] + g[1][1]) / law.a_lower);
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub pass: bool,
    /// Smallest envelope − ℰ over the samples.
    pub margin: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Checks ℰᵏ ≤ (ℰ⁰ + Σ credit)·Π(1 − dt c)⁻¹ at every step.
pub fn gronwall_monitor(reports: &[Rr5Report], c_lip: f64, tol: f64) -> GronwallReport {
    let e0 = reports.first().map_or(0.0, |r| r.rel_before);
    let t0 = reports.first().map_or(0.0, |r| r.t0);
    let mut times = alloc::vec![t0];
    let mut values = alloc::vec![e0];
    let mut envelope = alloc::vec![e0];
    let mut credit = 0.0;
    let mut factor = 1.0;
    let mut margin = 0.0_f64;
    for r in reports {
        let q = 1.0 - (r.t1 - r.t0) * c_lip;
        factor = if q > 0.0 { factor / q } else { f64::INFINITY };
        credit += r.credit;
        let env = (e0 + credit) * factor;
        times.push(r.t1);
        values.push(r.rel_after);
        envelope.push(env);
        margin = margin.min(env - r.rel_after);
    }
    GronwallReport { pass: margin >= -tol, margin, times, values, envelope }
}

/// Both halves of ∫|ρ/ρ̃ − 1||ũ − u| split at ρ = δ, with the bounds that
/// close the Gronwall argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumSplit {
    pub low: f64,
    pub high: f64,
    pub rel_energy: f64,
    /// Σ_{ρ≥δ} w [½ρ|ũ−u|² + (ρ−ρ̃)²/(2ρρ̃²)], a pointwise Young bound for `high`.
    pub high_young: f64,
    /// ½ Σ w Ã(|ũ − u|)
    pub half_young_integral: f64,
    /// Recorded c(δ) with high ≤ c(δ)·ℰ.
    pub c_high: f64,
    /// Recorded c(δ, Ã) with low ≤ ½∫Ã + c(δ, Ã)·ℰ.
    pub c_low: f64,
    pub holds: bool,
}

/// `a_tilde` is the rescaled Young function Ã_R(z) = scale·A_R(z).
pub fn vacuum_split_bound<S: StrongSolution + ?Sized>(
    space: &Space,
    law: &PressureLaw,
    rho: &[f64],
    u: &[Vec2],
    s: &S,
    t: f64,
    delta_split: f64,
    a_tilde: (&YoungFunction, f64),
) -> Result<VacuumSplit> {
    if !(delta_split > 0.0) {
        return Err(domain("split level must be positive"));
    }
    let dom = &space.domain;
    let (mut low, mut high, mut high_young, mut half_a) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..dom.node_count() {
        let x = dom.coords(k);
        let (rt, ut) = (s.rho(t, x), s.u(t, x));
        let d = [ut[0] - u[k][0], ut[1] - u[k][1]];
        let dn = sqrt(d[0] * d[0] + d[1] * d[1]);
        let w = dom.weights[k];
        let val = w * fabs(rho[k] / rt - 1.0) * dn;
        half_a += 0.5 * w * a_tilde.1 * a_tilde.0.eval(dn);
        if rho[k] < delta_split {
            low += val;
        } else {
            high += val;
            high_young += w * (0.5 * rho[k] * dn * dn + (rho[k] - rt) * (rho[k] - rt) / (2.0 * rho[k] * rt * rt));
        }
    }
    let rel = rel_energy_fields(space, law, rho, u, s, t);
    let c_of = |num: f64| if num <= 0.0 { 0.0 } else if rel > 0.0 { num / rel } else { f64::INFINITY };
    let c_high = c_of(high);
    let c_low = c_of(low - half_a);
    let holds = high <= high_young * (1.0 + 1e-12) + 1e-300 && c_high.is_finite() && c_low.is_finite();
    Ok(VacuumSplit { low, high, rel_energy: rel, high_young, half_young_integral: half_a, c_high, c_low, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_matches_boundary_and_positivity() {
        let m = Manufactured::new(0.5, 0.3, 1.0, 1.0).unwrap();
        for &x in &[[0.0, 0.3], [1.0, 0.7], [0.2, 0.0], [0.6, 1.0]] {
            let u = m.u(0.4, x);
            assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
        }
        assert!(Manufactured::new(0.5, 1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn euler_residual_of_rest_is_zero() {
        let law = PressureLaw::isentropic(1.0, 2.0).unwrap();
        let rest = ClosureSolution { rho: Arc::new(|_, _| 2.0), u: Arc::new(|_, _| [0.0, 0.0]) };
        let (m, f) = euler_residuals(&rest, &law, 0.3, [0.4, 0.5]);
        assert!(m.abs() < 1e-12 && f[0].abs() < 1e-10 && f[1].abs() < 1e-10);
    }

    #[test]
    fn derivatives_are_fourth_order_accurate() {
        let m = Manufactured::new(1.0, 0.4, 1.0, 1.0).unwrap();
        let g = grad_rho(&m, 0.0, [0.3, 0.2]);
        let exact = -0.4 * PI * (PI * 0.3).sin() * (PI * 0.2).cos();
        assert!((g[0] - exact).abs() < 1e-9);
    }
}
