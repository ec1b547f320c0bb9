//! Galerkin momentum balance and the Picard coupling with the density solve.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::continuity::{step_density, ExtremaRecord};
use crate::domain::{sym2, Mat2, Space, Vec2};
use crate::eos::PressureLaw;
use crate::error::{config, domain, Error, Result};
use crate::math::{fabs, sqrt, DenseLu};
use crate::rheology::ViscousPotential;
use crate::tensor::SymMatrix;

/// Body force and mass source at (t, x): returns (f, g).
pub type SourceFn = Arc<dyn Fn(f64, Vec2) -> (Vec2, f64) + Send + Sync>;

/// Nodal samples of the sources at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    pub f: Vec<Vec2>,
    pub g: Vec<f64>,
}

#[derive(Clone)]
pub struct Model {
    pub space: Space,
    pub law: PressureLaw,
    pub potential: ViscousPotential,
    pub eps: f64,
    pub sources: Option<SourceFn>,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl core::fmt::Debug for Model {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Model")
            .field("n", &self.space.n())
            .field("m", &self.space.domain.m)
            .field("eps", &self.eps)
            .field("law", &self.law)
            .field("potential", &self.potential.kind)
            .field("delta", &self.potential.delta)
            .field("sources", &self.sources.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub t: f64,
    pub rho: Vec<f64>,
    /// Coefficients of v in the Galerkin basis; u = u_B + v.
    pub c: Vec<f64>,
}

/// One accepted step of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub dt: f64,
    pub state: DiscreteState,
    /// Velocity coefficients that transported the density over this step.
    pub c_transport: Vec<f64>,
    pub iterations: usize,
    /// ‖c⁺ − c_transport‖_∞ at acceptance.
    pub picard_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: DiscreteState,
    pub steps: Vec<StepRecord>,
    /// Set when the run stopped early; the steps above stay valid.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn states(&self) -> impl Iterator<Item = &DiscreteState> {
        core::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.state))
    }

    pub fn last(&self) -> &DiscreteState {
        self.steps.last().map_or(&self.initial, |s| &s.state)
    }

    /// (previous state, step) pairs.
    pub fn intervals(&self) -> impl Iterator<Item = (&DiscreteState, &StepRecord)> {
        self.states().zip(self.steps.iter())
    }
}

/// A vector test field sampled the way the momentum residual consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    pub node_vals: Vec<Vec2>,
    pub node_grads: Vec<Mat2>,
    /// φ·n at face midpoints.
    pub face_normal: Vec<f64>,
}

impl TestField {
    pub fn mode(space: &Space, j: usize) -> Self {
        let b = &space.basis;
        let comp = b.modes[j].comp;
        let node_vals = b.node_vals[j]
            .iter()
            .map(|w| {
                let mut v = [0.0; 2];
                v[comp] = *w;
                v
            })
            .collect();
        let node_grads = b.node_grads[j]
            .iter()
            .map(|g| {
                let mut m = [[0.0; 2]; 2];
                m[comp] = *g;
                m
            })
            .collect();
        TestField { node_vals, node_grads, face_normal: b.face_vals[j].clone() }
    }

    /// The Galerkin field Σ c_j w_j.
    pub fn from_coeffs(space: &Space, c: &[f64]) -> Self {
        let face_normal = (0..space.domain.faces.len())
            .map(|fi| c.iter().zip(&space.basis.face_vals).map(|(ci, fv)| ci * fv[fi]).sum())
            .collect();
        TestField { node_vals: space.v_nodes(c), node_grads: space.grad_v_nodes(c), face_normal }
    }

    /// Samples a C¹ field; the gradient is taken by central differences.
    /// Fails when the field does not vanish on the boundary.
    pub fn from_fn<F: Fn(f64, f64) -> Vec2>(space: &Space, phi: F) -> Result<Self> {
        let dom = &space.domain;
        let n = dom.node_count();
        let h = 1e-6 * dom.l1.max(dom.l2);
        let mut node_vals = Vec::with_capacity(n);
        let mut node_grads = Vec::with_capacity(n);
        let mut scale: f64 = 0.0;
        for k in 0..n {
            let [x, y] = dom.coords(k);
            let v = phi(x, y);
            scale = scale.max(fabs(v[0])).max(fabs(v[1]));
            node_vals.push(v);
            let (xp, xm, yp, ym) = (phi(x + h, y), phi(x - h, y), phi(x, y + h), phi(x, y - h));
            let mut g = [[0.0; 2]; 2];
            for c in 0..2 {
                g[c][0] = (xp[c] - xm[c]) / (2.0 * h);
                g[c][1] = (yp[c] - ym[c]) / (2.0 * h);
            }
            node_grads.push(g);
        }
        for b in &dom.boundary {
            let v = node_vals[b.node];
            if fabs(v[0]).max(fabs(v[1])) > 1e-10 * scale.max(1.0) {
                return Err(domain(format!(
                    "test field has nonzero boundary trace at node {}",
                    b.node
                )));
            }
        }
        let face_normal = dom
            .faces
            .iter()
            .map(|f| {
                let v = phi(f.mid[0], f.mid[1]);
                v[0] * f.normal[0] + v[1] * f.normal[1]
            })
            .collect();
        Ok(TestField { node_vals, node_grads, face_normal })
    }
}

/// Linear functional φ ↦ R(φ) assembled from the two time levels:
/// R(φ) = Σ a_k·φ_k + Σ W_k:∇φ_k + Σ e_f (φ·n)_f, with absolute counterparts
/// for a residual scale.
pub struct Functional {
    a: Vec<Vec2>,
    a_abs: Vec<f64>,
    w: Vec<SymMatrix>,
    w_abs: Vec<f64>,
    e: Vec<f64>,
    e_abs: Vec<f64>,
}

impl Functional {
    pub fn apply(&self, tf: &TestField) -> (f64, f64) {
        let mut r = 0.0;
        let mut s = 0.0;
        for k in 0..self.a.len() {
            let p = tf.node_vals[k];
            let g = &tf.node_grads[k];
            r += self.a[k][0] * p[0] + self.a[k][1] * p[1] + crate::domain::contract2(&self.w[k], g);
            s += self.a_abs[k] * sqrt(p[0] * p[0] + p[1] * p[1])
                + self.w_abs[k] * sqrt(g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
        for (f, (e, ea)) in tf.face_normal.iter().zip(self.e.iter().zip(&self.e_abs)) {
            r += e * f;
            s += ea * fabs(*f);
        }
        (r, s)
    }

    fn apply_mode(&self, space: &Space, j: usize) -> (f64, f64) {
        let b = &space.basis;
        let c = b.modes[j].comp;
        let mut r = 0.0;
        let mut s = 0.0;
        for (k, (w, g)) in b.node_vals[j].iter().zip(&b.node_grads[j]).enumerate() {
            let wk = &self.w[k];
            r += self.a[k][c] * w + wk.a[c][0] * g[0] + wk.a[c][1] * g[1];
            s += self.a_abs[k] * fabs(*w) + self.w_abs[k] * sqrt(g[0] * g[0] + g[1] * g[1]);
        }
        for (f, (e, ea)) in b.face_vals[j].iter().zip(self.e.iter().zip(&self.e_abs)) {
            r += e * f;
            s += ea * fabs(*f);
        }
        (r, s)
    }
}

impl Model {
    pub fn new(space: Space, law: PressureLaw, potential: ViscousPotential, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(config("artificial viscosity eps must be positive"));
        }
        Ok(Model {
            space,
            law,
            potential,
            eps,
            sources: None,
            picard_tol: 1e-10,
            picard_max: 12,
            newton_tol: 1e-11,
            newton_max: 30,
        })
    }

    pub fn with_sources(mut self, s: SourceFn) -> Self {
        self.sources = Some(s);
        self
    }

    pub fn sources_at(&self, t: f64) -> Option<Sources> {
        let s = self.sources.as_ref()?;
        let dom = &self.space.domain;
        let mut f = Vec::with_capacity(dom.node_count());
        let mut g = Vec::with_capacity(dom.node_count());
        for k in 0..dom.node_count() {
            let (fk, gk) = s(t, dom.coords(k));
            f.push(fk);
            g.push(gk);
        }
        Some(Sources { f, g })
    }

    /// Initial state with v₀ the projection of u₀ − u_B.
    pub fn initial_state<R, U>(&self, rho0: R, u0: U) -> Result<DiscreteState>
    where
        R: Fn(f64, f64) -> f64,
        U: Fn(f64, f64) -> Vec2,
    {
        let dom = &self.space.domain;
        let rho = dom.sample(rho0);
        if let Some(k) = (0..rho.len()).find(|&k| !(rho[k] > 0.0)) {
            return Err(domain(format!("initial density must be positive (node {k})")));
        }
        let diff: Vec<Vec2> = (0..dom.node_count())
            .map(|k| {
                let [x, y] = dom.coords(k);
                let u = u0(x, y);
                let b = self.space.bc.ub_nodes[k];
                [u[0] - b[0], u[1] - b[1]]
            })
            .collect();
        let c = self.space.basis.project(dom, &diff);
        Ok(DiscreteState { t: 0.0, rho, c })
    }

    /// Nodal stress ∂F_δ(𝔻u) for the coefficients c.
    pub fn stress_nodes(&self, c: &[f64]) -> Vec<SymMatrix> {
        self.space
            .grad_u_nodes(c)
            .iter()
            .map(|g| self.potential.subdifferential(&sym2(g)))
            .collect()
    }

    /// The momentum residual functional for the step prev → (rho_next, c_next)
    /// with the face fluxes `flux` transporting mass.
    #[allow(clippy::too_many_arguments)]
    pub fn functional(
        &self,
        prev: &DiscreteState,
        rho_next: &[f64],
        c_next: &[f64],
        flux: &[f64],
        dt: f64,
        src: Option<&Sources>,
    ) -> Functional {
        let dom = &self.space.domain;
        let n = dom.node_count();
        let u0 = self.space.u_nodes(&prev.c);
        let u1 = self.space.u_nodes(c_next);
        let stress = self.stress_nodes(c_next);
        let mut a = vec![[0.0; 2]; n];
        let mut a_abs = vec![0.0; n];
        let mut w = Vec::with_capacity(n);
        let mut w_abs = Vec::with_capacity(n);
        let norm = |v: Vec2| sqrt(v[0] * v[0] + v[1] * v[1]);
        for k in 0..n {
            let wk = dom.weights[k];
            let m1 = [wk * rho_next[k] * u1[k][0], wk * rho_next[k] * u1[k][1]];
            let m0 = [wk * prev.rho[k] * u0[k][0], wk * prev.rho[k] * u0[k][1]];
            a[k] = [m1[0] - m0[0], m1[1] - m0[1]];
            a_abs[k] = norm(m1) + norm(m0);
            if let Some(s) = src {
                let fk = [dt * wk * s.f[k][0], dt * wk * s.f[k][1]];
                a[k][0] -= fk[0];
                a[k][1] -= fk[1];
                a_abs[k] += norm(fk);
            }
            let sk = stress[k] * (dt * wk);
            w_abs.push(sk.norm());
            w.push(sk);
        }
        let mut e = Vec::with_capacity(dom.faces.len());
        let mut e_abs = Vec::with_capacity(dom.faces.len());
        for (f, uf) in dom.faces.iter().zip(flux) {
            let rf = 0.5 * (rho_next[f.a] + rho_next[f.b]);
            let ff = rf * uf * f.len;
            let ubar = [0.5 * (u1[f.a][0] + u1[f.b][0]), 0.5 * (u1[f.a][1] + u1[f.b][1])];
            let g = [dt * ff * ubar[0], dt * ff * ubar[1]];
            a[f.a][0] += g[0];
            a[f.a][1] += g[1];
            a[f.b][0] -= g[0];
            a[f.b][1] -= g[1];
            let gn = norm(g);
            a_abs[f.a] += gn;
            a_abs[f.b] += gn;
            let kf = 0.5 * dt * self.eps * f.len / f.dist * (rho_next[f.b] - rho_next[f.a]);
            let q = [kf * (u1[f.b][0] - u1[f.a][0]), kf * (u1[f.b][1] - u1[f.a][1])];
            for node in [f.a, f.b] {
                a[node][0] += q[0];
                a[node][1] += q[1];
                a_abs[node] += norm(q);
            }
            let ef = dt * rf * (self.law.dpot(rho_next[f.b]) - self.law.dpot(rho_next[f.a])) * f.len;
            e.push(ef);
            e_abs.push(dt * rf * f.len * (fabs(self.law.dpot(rho_next[f.b])) + fabs(self.law.dpot(rho_next[f.a]))));
        }
        Functional { a, a_abs, w, w_abs, e, e_abs }
    }

    /// Residual of the discrete momentum balance against every basis function,
    /// with a per-row magnitude scale.
    #[allow(clippy::too_many_arguments)]
    pub fn momentum_residual(
        &self,
        prev: &DiscreteState,
        rho_next: &[f64],
        c_next: &[f64],
        flux: &[f64],
        dt: f64,
        src: Option<&Sources>,
    ) -> (Vec<f64>, Vec<f64>) {
        let fun = self.functional(prev, rho_next, c_next, flux, dt, src);
        (0..self.space.n()).map(|j| fun.apply_mode(&self.space, j)).unzip()
    }

    /// Newton solve for c⁺ with the density and transport fixed.
    #[allow(clippy::too_many_arguments)]
    fn newton(
        &self,
        prev: &DiscreteState,
        rho_next: &[f64],
        flux: &[f64],
        dt: f64,
        src: Option<&Sources>,
        guess: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.space.n();
        let mut c = guess.to_vec();
        let eval = |c: &[f64]| self.momentum_residual(prev, rho_next, c, flux, dt, src);
        let inf = |r: &[f64]| r.iter().map(|v| fabs(*v)).fold(0.0, f64::max);
        let (mut r, s) = eval(&c);
        let mut scale = inf(&s).max(1e-300);
        let mut rn = inf(&r);
        for it in 0..self.newton_max {
            if rn <= self.newton_tol * scale {
                return Ok(c);
            }
            let mut jac = vec![0.0; n * n];
            for j in 0..n {
                let h = 1e-7 * fabs(c[j]).max(1.0);
                let mut cp = c.clone();
                cp[j] += h;
                let (rp, _) = eval(&cp);
                for i in 0..n {
                    jac[i * n + j] = (rp[i] - r[i]) / h;
                }
            }
            let lu = DenseLu::factor(n, jac).ok_or(Error::Newton { residual: rn / scale, iterations: it })?;
            let mut d: Vec<f64> = r.iter().map(|v| -v).collect();
            lu.solve(&mut d);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
                let (rt, st) = eval(&trial);
                let tn = inf(&rt);
                if tn.is_finite() && (tn < rn || tn <= self.newton_tol * inf(&st)) {
                    c = trial;
                    r = rt;
                    rn = tn;
                    scale = inf(&st).max(1e-300);
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::Newton { residual: rn / scale, iterations: it + 1 });
            }
        }
        if rn <= self.newton_tol * scale {
            Ok(c)
        } else {
            Err(Error::Newton { residual: rn / scale, iterations: self.newton_max })
        }
    }

    /// One time step: Picard iteration between the density solve and the
    /// Galerkin momentum system.
    pub fn fixed_point_step(&self, state: &DiscreteState, dt: f64) -> Result<StepRecord> {
        if !(dt > 0.0) || !(self.picard_tol > 0.0) {
            return Err(domain("need dt > 0 and tol > 0"));
        }
        let t1 = state.t + dt;
        let src = self.sources_at(t1);
        let g = src.as_ref().map(|s| s.g.as_slice());
        let mut c_iter = state.c.clone();
        let mut history = Vec::new();
        for it in 1..=self.picard_max {
            let flux = self.space.face_flux(&c_iter);
            let rho = step_density(&self.space, &state.rho, &flux, self.eps, dt, g)?;
            let c_new = self.newton(state, &rho, &flux, dt, src.as_ref(), &c_iter)?;
            let gap = c_new
                .iter()
                .zip(&c_iter)
                .map(|(a, b)| fabs(a - b))
                .fold(0.0, f64::max);
            let size = c_new.iter().map(|v| fabs(*v)).fold(1.0, f64::max);
            history.push(gap);
            if !gap.is_finite() {
                break;
            }
            if gap <= self.picard_tol * size {
                // the implicit extremum bounds need dt ‖div u‖ < 1
                let div = self.space.div_inf(&c_iter);
                if dt * div >= 1.0 {
                    return Err(Error::StepRejected {
                        reason: format!("dt * |div u| = {:.3} leaves the density bounds uncontrolled", dt * div),
                        suggested_dt: 0.5 / div,
                        history,
                    });
                }
                return Ok(StepRecord {
                    dt,
                    state: DiscreteState { t: t1, rho, c: c_new },
                    c_transport: c_iter,
                    iterations: it,
                    picard_gap: gap,
                });
            }
            c_iter = c_new;
        }
        Err(Error::StepRejected {
            reason: format!("fixed point did not converge in {} iterations", self.picard_max),
            suggested_dt: 0.5 * dt,
            history,
        })
    }

    /// Extremum-principle inputs for every accepted step.
    pub fn extrema_records(&self, traj: &Trajectory) -> Vec<ExtremaRecord> {
        traj.steps
            .iter()
            .map(|s| {
                let (mut g_plus, mut g_minus) = (0.0f64, 0.0f64);
                if let Some(src) = self.sources_at(s.state.t) {
                    for g in &src.g {
                        g_plus = g_plus.max(*g);
                        g_minus = g_minus.max(-*g);
                    }
                }
                ExtremaRecord {
                    dt: s.dt,
                    min_rho: s.state.rho.iter().cloned().fold(f64::INFINITY, f64::min),
                    max_rho: s.state.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    div_inf: self.space.div_inf(&s.c_transport),
                    g_plus,
                    g_minus,
                }
            })
            .collect()
    }

    /// Marches from `initial` to `t_final` with uniform steps; stops at the
    /// first rejection and keeps what was accepted.
    pub fn advance(&self, initial: DiscreteState, t_final: f64, dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0) || !(t_final >= 0.0) {
            return Err(domain("need dt > 0 and t_final >= 0"));
        }
        let count = libm::round(t_final / dt) as usize;
        if fabs(count as f64 * dt - t_final) > 1e-9 * t_final.max(dt) {
            return Err(config("t_final must be an integer multiple of dt"));
        }
        let mut traj = Trajectory { initial, steps: Vec::new(), failure: None };
        for _ in 0..count {
            match self.fixed_point_step(traj.last(), dt) {
                Ok(mut rec) => {
                    // keep the time grid exact
                    rec.state.t = (traj.steps.len() + 1) as f64 * dt + traj.initial.t;
                    traj.steps.push(rec)
                }
                Err(e) => {
                    traj.failure = Some(e);
                    break;
                }
            }
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryData, Domain};

    fn rest_model(m: usize, n: usize) -> Model {
        let d = Domain::new(1.0, 1.0, m).unwrap();
        let bc = BoundaryData::at_rest(&d);
        let space = Space::new(d, n, bc).unwrap();
        Model::new(
            space,
            PressureLaw::isentropic(1.0, 2.0).unwrap(),
            ViscousPotential::newtonian(1.0, 0.5).unwrap(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let model = rest_model(8, 4);
        let s0 = model.initial_state(|_, _| 1.3, |_, _| [0.0, 0.0]).unwrap();
        let rec = model.fixed_point_step(&s0, 0.1).unwrap();
        assert_eq!(rec.iterations, 1);
        assert!(rec.state.c.iter().all(|v| v.abs() < 1e-14));
        let flux = model.space.face_flux(&s0.c);
        let (r, _) = model.momentum_residual(&s0, &s0.rho, &s0.c, &flux, 0.1, None);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn converged_step_solves_galerkin_system() {
        let model = rest_model(12, 6);
        let s0 = model
            .initial_state(
                |x, _| 1.0 + 0.2 * x,
                |x, y| [(3.0 * x).sin() * y * (1.0 - y), 0.5 * x * (1.0 - x) * y],
            )
            .unwrap();
        let rec = model.fixed_point_step(&s0, 0.01).unwrap();
        let flux = model.space.face_flux(&rec.c_transport);
        let (r, s) = model.momentum_residual(&s0, &rec.state.rho, &rec.state.c, &flux, 0.01, None);
        for (ri, si) in r.iter().zip(&s) {
            assert!(ri.abs() <= 1e-10 * si.max(1e-300));
        }
        let t = TestField::mode(&model.space, 2);
        let fun = model.functional(&s0, &rec.state.rho, &rec.state.c, &flux, 0.01, None);
        assert!((fun.apply(&t).0 - r[2]).abs() < 1e-14);
    }

    #[test]
    fn test_field_rejects_boundary_trace() {
        let model = rest_model(8, 2);
        assert!(TestField::from_fn(&model.space, |x, _| [x, 0.0]).is_err());
        assert!(TestField::from_fn(&model.space, |x, y| [x * (1.0 - x) * y * (1.0 - y), 0.0]).is_ok());
    }

    #[test]
    fn zero_final_time_keeps_initial() {
        let model = rest_model(8, 2);
        let s0 = model.initial_state(|_, _| 1.0, |_, _| [0.0, 0.0]).unwrap();
        let tr = model.advance(s0.clone(), 0.0, 0.1).unwrap();
        assert!(tr.steps.is_empty());
        assert_eq!(tr.last(), &s0);
    }
}
