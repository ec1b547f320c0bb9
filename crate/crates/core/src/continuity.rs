//! Parabolic continuity equation with Robin inflow data: implicit Euler on the
//! vertex-centered grid, plus the mass, renormalization and min/max monitors.
//!
//! For every nodal test function ψ one step solves
//!
//! Σ w (ρ⁺ − ρ) ψ = dt [ C(ρ⁺, ψ) − ε K(ρ⁺, ψ) − B₁(ρ⁺, ψ) + B₂(ρ⁺, ψ) + Σ w g ψ ]
//!
//! with C the centered face transport, K the discrete Dirichlet form,
//! B₁ = Σ_∂ ψ ρ u_B·n and B₂ = Σ_∂ ψ (ρ − ρ_B) [u_B·n]⁻.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Space;
use crate::error::{Error, Result};
use crate::math::{fabs, neg_part, BandMatrix};

/// C(ρ, ψ) = Σ_f ½(ρ_a + ρ_b) U_f |f| (ψ_b − ψ_a).
pub fn transport_form(space: &Space, rho: &[f64], flux: &[f64], psi: &[f64]) -> f64 {
    space
        .domain
        .faces
        .iter()
        .zip(flux)
        .map(|(f, u)| 0.5 * (rho[f.a] + rho[f.b]) * u * f.len * (psi[f.b] - psi[f.a]))
        .sum()
}

/// B₁(ρ, ψ) = Σ_∂ ψ ρ u_B·n.
pub fn boundary_flux_form(space: &Space, rho: &[f64], psi: &[f64]) -> f64 {
    space
        .domain
        .boundary
        .iter()
        .zip(&space.bc.ubn)
        .map(|(b, un)| b.weight * psi[b.node] * rho[b.node] * un)
        .sum()
}

/// B₂(ρ, ψ) = Σ_∂ ψ (ρ − ρ_B) [u_B·n]⁻.
pub fn robin_form(space: &Space, rho: &[f64], psi: &[f64]) -> f64 {
    space
        .domain
        .boundary
        .iter()
        .zip(&space.bc.ubn)
        .zip(&space.bc.rho_b)
        .map(|((b, un), rb)| b.weight * psi[b.node] * (rho[b.node] - rb) * neg_part(*un))
        .sum()
}

/// Σ w (ρ⁺ − ρ) ψ − dt [C − εK − B₁ + B₂ + Σ w g ψ]; zero for the computed step.
#[allow(clippy::too_many_arguments)]
pub fn weak_residual(
    space: &Space,
    rho: &[f64],
    rho_next: &[f64],
    flux: &[f64],
    eps: f64,
    dt: f64,
    g: Option<&[f64]>,
    psi: &[f64],
) -> f64 {
    let dom = &space.domain;
    let mut lhs = 0.0;
    for k in 0..dom.node_count() {
        lhs += dom.weights[k] * (rho_next[k] - rho[k]) * psi[k];
    }
    let src = g.map_or(0.0, |g| (0..dom.node_count()).map(|k| dom.weights[k] * g[k] * psi[k]).sum());
    let rhs = transport_form(space, rho_next, flux, psi) - eps * dom.dirichlet(rho_next, psi)
        - boundary_flux_form(space, rho_next, psi)
        + robin_form(space, rho_next, psi)
        + src;
    lhs - dt * rhs
}

/// One implicit Euler step of the continuity equation with face fluxes U_f.
pub fn step_density(
    space: &Space,
    rho: &[f64],
    flux: &[f64],
    eps: f64,
    dt: f64,
    g: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) || !(dt > 0.0) {
        return Err(Error::Domain("need eps > 0 and dt > 0".into()));
    }
    let dom = &space.domain;
    let n = dom.node_count();
    let bw = dom.m + 1;
    let mut a = BandMatrix::zeros(n, bw, bw);
    let mut b = vec![0.0; n];
    for k in 0..n {
        a.add(k, k, dom.weights[k]);
        b[k] = dom.weights[k] * rho[k] + g.map_or(0.0, |g| dt * dom.weights[k] * g[k]);
    }
    for (f, u) in dom.faces.iter().zip(flux) {
        let c = 0.5 * dt * u * f.len;
        a.add(f.a, f.a, c);
        a.add(f.a, f.b, c);
        a.add(f.b, f.a, -c);
        a.add(f.b, f.b, -c);
        let d = dt * eps * f.len / f.dist;
        a.add(f.a, f.a, d);
        a.add(f.a, f.b, -d);
        a.add(f.b, f.b, d);
        a.add(f.b, f.a, -d);
    }
    for ((bn, un), rb) in dom.boundary.iter().zip(&space.bc.ubn).zip(&space.bc.rho_b) {
        let neg = neg_part(*un);
        a.add(bn.node, bn.node, dt * bn.weight * (un - neg));
        b[bn.node] -= dt * bn.weight * neg * rb;
    }
    let scale = b.iter().map(|v| fabs(*v)).fold(0.0, f64::max).max(1e-300);
    let reject = |reason: &str| Error::StepRejected {
        reason: reason.into(),
        suggested_dt: 0.25 * dt,
        history: Vec::new(),
    };
    let lu = a.clone().factor().ok_or_else(|| reject("singular density system"))?;
    let mut x = b.clone();
    lu.solve(&mut x);
    let mut r = vec![0.0; n];
    // one round of iterative refinement, then verify the residual
    for pass in 0..2 {
        a.mul_vec(&x, &mut r);
        let mut worst: f64 = 0.0;
        for k in 0..n {
            r[k] = b[k] - r[k];
            worst = worst.max(fabs(r[k]));
        }
        if !worst.is_finite() {
            return Err(reject("density solve produced non-finite values"));
        }
        if worst <= 1e-11 * scale {
            break;
        }
        if pass == 1 {
            return Err(reject(&format!(
                "density residual {:.3e} exceeds tolerance (ill-conditioned system)",
                worst / scale
            )));
        }
        lu.solve(&mut r);
        for k in 0..n {
            x[k] += r[k];
        }
    }
    if let Some(k) = (0..n).find(|&k| !(x[k] > 0.0)) {
        return Err(Error::StepRejected {
            reason: format!("nonpositive density {:.3e} at node {k}", x[k]),
            suggested_dt: 0.5 * dt,
            history: Vec::new(),
        });
    }
    Ok(x)
}

/// Mass balance of one step (test function ψ ≡ 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassLedger {
    pub mass_before: f64,
    pub mass_after: f64,
    /// dt Σ_Γout ρ u_B·n
    pub outflow: f64,
    /// dt Σ_Γin ρ_B u_B·n (negative)
    pub inflow: f64,
    /// dt Σ w g
    pub source: f64,
    pub residual: f64,
    pub scale: f64,
}

impl MassLedger {
    pub fn relative(&self) -> f64 {
        fabs(self.residual) / self.scale
    }
}

pub fn mass_ledger(space: &Space, rho: &[f64], rho_next: &[f64], dt: f64, g: Option<&[f64]>) -> MassLedger {
    let dom = &space.domain;
    let (mut out, mut inn) = (0.0, 0.0);
    for ((b, un), rb) in dom.boundary.iter().zip(&space.bc.ubn).zip(&space.bc.rho_b) {
        if *un > 0.0 {
            out += dt * b.weight * rho_next[b.node] * un;
        } else if *un < 0.0 {
            inn += dt * b.weight * rb * un;
        }
    }
    let source = g.map_or(0.0, |g| dt * dom.integrate(g));
    let m0 = dom.integrate(rho);
    let m1 = dom.integrate(rho_next);
    let residual = (m1 - m0) + out + inn - source;
    let scale = m0.max(m1).max(fabs(out) + fabs(inn) + fabs(source)).max(1e-300);
    MassLedger { mass_before: m0, mass_after: m1, outflow: out, inflow: inn, source, residual, scale }
}

/// Renormalizing function B with its first two derivatives.
pub trait Renormalizer {
    fn eval(&self, r: f64) -> (f64, f64, f64);
}

impl<F: Fn(f64) -> (f64, f64, f64)> Renormalizer for F {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        self(r)
    }
}

/// Defect of the renormalized identity over one step with r = ρ − χ:
///
/// Σ w [B(r⁺) − B(r)] − dt C(ρ⁺, B′) + dt B₁(ρ⁺, B′) + dt ε K(r⁺, B′(r⁺))
/// + Σ w (χ⁺ − χ) B′ − dt B₂(ρ⁺, B′) − dt Σ w g B′
#[allow(clippy::too_many_arguments)]
pub fn renormalized_defect<B: Renormalizer + ?Sized>(
    space: &Space,
    rho: &[f64],
    rho_next: &[f64],
    flux: &[f64],
    eps: f64,
    dt: f64,
    g: Option<&[f64]>,
    b: &B,
    chi: (f64, f64),
) -> f64 {
    let dom = &space.domain;
    let n = dom.node_count();
    let r1: Vec<f64> = rho_next.iter().map(|v| v - chi.1).collect();
    let mut dbv = vec![0.0; n];
    let mut bulk = 0.0;
    for k in 0..n {
        let (b1, d1, _) = b.eval(r1[k]);
        let (b0, _, _) = b.eval(rho[k] - chi.0);
        dbv[k] = d1;
        bulk += dom.weights[k] * (b1 - b0 + (chi.1 - chi.0) * d1);
    }
    let src = g.map_or(0.0, |g| (0..n).map(|k| dom.weights[k] * g[k] * dbv[k]).sum());
    bulk + dt
        * (-transport_form(space, rho_next, flux, &dbv) + boundary_flux_form(space, rho_next, &dbv)
            + eps * dom.dirichlet(&r1, &dbv)
            - robin_form(space, rho_next, &dbv)
            - src)
}

/// ‖∂_t ρ‖² in L²(0,T;L²) and ε sup_t K(ρ, ρ) along a density history.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicMonitor {
    pub dt_rho_sq: f64,
    pub eps_grad_sq: Vec<f64>,
    pub eps_grad_sup: f64,
}

pub fn parabolic_monitor(space: &Space, rhos: &[&[f64]], dt: f64, eps: f64) -> ParabolicMonitor {
    let dom = &space.domain;
    let mut acc = 0.0;
    for w in rhos.windows(2) {
        let s: f64 = (0..dom.node_count())
            .map(|k| dom.weights[k] * (w[1][k] - w[0][k]) * (w[1][k] - w[0][k]))
            .sum();
        acc += s / dt;
    }
    let g: Vec<f64> = rhos.iter().map(|r| eps * dom.dirichlet(r, r)).collect();
    let sup = g.iter().copied().fold(0.0, f64::max);
    ParabolicMonitor { dt_rho_sq: acc, eps_grad_sq: g, eps_grad_sup: sup }
}

/// Per-step data for the extremum principles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaRecord {
    pub dt: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// ‖div u‖_∞ of the transporting velocity over the step.
    pub div_inf: f64,
    /// max(g, 0) and max(−g, 0) over the nodes; zero without sources.
    pub g_plus: f64,
    pub g_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub pass: bool,
    /// Smallest bound − value (upper) or value − bound (lower) seen.
    pub margin: f64,
}

/// ‖ρ‖_∞ ≤ max{‖ρ₀‖, ‖ρ_B‖} Π (1 − dt‖div u‖)⁻¹, the implicit Euler form
/// of the exponential growth factor. Sources enter as Mᵏ⁺¹ = (Mᵏ + dt g⁺)/(1 − dt‖div u‖).
pub fn max_principle(records: &[ExtremaRecord], data_max: f64, tol: f64) -> BoundCheck {
    let mut bound = data_max;
    let mut margin = f64::INFINITY;
    for r in records {
        let q = 1.0 - r.dt * r.div_inf;
        bound = if q > 0.0 { (bound + r.dt * r.g_plus) / q } else { f64::INFINITY };
        margin = margin.min(bound - r.max_rho);
    }
    BoundCheck { pass: margin >= -tol, margin }
}

/// ρ ≥ min{ρ₀, ρ_B} Π (1 + dt‖div u‖)⁻¹, with mᵏ⁺¹ = (mᵏ − dt g⁻)/(1 + dt‖div u‖) under sources.
pub fn min_principle(records: &[ExtremaRecord], data_min: f64, tol: f64) -> BoundCheck {
    let mut bound = data_min;
    let mut margin = f64::INFINITY;
    for r in records {
        bound = (bound - r.dt * r.g_minus) / (1.0 + r.dt * r.div_inf);
        margin = margin.min(r.min_rho - bound);
    }
    BoundCheck { pass: margin >= -tol, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryData, Domain};

    fn box_space(m: usize) -> Space {
        let d = Domain::new(1.0, 1.0, m).unwrap();
        let bc = BoundaryData::at_rest(&d);
        Space::new(d, 1, bc).unwrap()
    }

    #[test]
    fn constants_are_steady() {
        let s = box_space(8);
        let rho = vec![1.7; s.domain.node_count()];
        let flux = s.face_flux(&[0.0]);
        let next = step_density(&s, &rho, &flux, 0.1, 0.05, None).unwrap();
        for v in &next {
            assert!((v - 1.7).abs() < 1e-13);
        }
    }

    #[test]
    fn diffusion_conserves_mass_and_shrinks_sup() {
        let s = box_space(16);
        let rho = s.domain.sample(|x, y| 1.0 + 0.3 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin());
        let flux = s.face_flux(&[0.0]);
        let next = step_density(&s, &rho, &flux, 0.05, 0.01, None).unwrap();
        let l = mass_ledger(&s, &rho, &next, 0.01, None);
        assert!(l.relative() < 1e-11);
        let m0 = rho.iter().cloned().fold(0.0, f64::max);
        let m1 = next.iter().cloned().fold(0.0, f64::max);
        assert!(m1 <= m0);
    }

    #[test]
    fn weak_form_holds_for_every_nodal_test_function() {
        let d = Domain::new(1.0, 1.0, 8).unwrap();
        let bc = BoundaryData::sample(&d, |_, _| [1.0, 0.0], |_, _| 1.0).unwrap();
        let s = Space::new(d, 2, bc).unwrap();
        let rho = vec![0.5; s.domain.node_count()];
        let flux = s.face_flux(&[0.1, -0.05]);
        let next = step_density(&s, &rho, &flux, 0.2, 0.01, None).unwrap();
        let mut psi = vec![0.0; s.domain.node_count()];
        for k in 0..psi.len() {
            psi[k] = 1.0;
            let r = weak_residual(&s, &rho, &next, &flux, 0.2, 0.01, None, &psi);
            assert!(r.abs() < 1e-13, "node {k}: {r}");
            psi[k] = 0.0;
        }
    }

    #[test]
    fn renormalized_linear_is_mass_ledger() {
        let s = box_space(8);
        let rho = s.domain.sample(|x, _| 1.0 + 0.2 * x);
        let flux = s.face_flux(&[0.3]);
        let next = step_density(&s, &rho, &flux, 0.1, 0.02, None).unwrap();
        let b = |r: f64| (r, 1.0, 0.0);
        let d = renormalized_defect(&s, &rho, &next, &flux, 0.1, 0.02, None, &b, (0.0, 0.0));
        let l = mass_ledger(&s, &rho, &next, 0.02, None);
        assert!((d - l.residual).abs() < 1e-14);
    }
}
