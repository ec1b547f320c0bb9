//! Convex viscous potentials, their conjugates, mollification and Young functions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::math::{exp, fabs, gauss_legendre, golden_max, log, pow, sqrt};
use crate::tensor::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Newtonian { mu: f64, eta: f64 },
    /// F(D) = μ0/p [(μ1 + |D₀|²)^{p/2} − μ1^{p/2}]
    PPotential { mu0: f64, mu1: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscousPotential {
    pub kind: PotentialKind,
    pub delta: f64,
    // normalized kernel quadrature for the 2-D coordinate space (3 dims)
    kernel2: Vec<([f64; 6], f64)>,
}

const KERNEL_PTS: usize = 7;

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - r2))
    }
}

/// Tensor Gauss points on [-1,1]^dims weighted by the bump kernel, normalized
/// so the discrete weights sum to one.
fn kernel_points(dims: usize) -> Vec<([f64; 6], f64)> {
    let (x, w) = gauss_legendre(KERNEL_PTS);
    let total = pow(KERNEL_PTS as f64, dims as f64) as usize;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims];
    let mut sum = 0.0;
    for _ in 0..total {
        let mut z = [0.0; 6];
        let mut wt = 1.0;
        let mut r2 = 0.0;
        for k in 0..dims {
            z[k] = x[idx[k]];
            wt *= w[idx[k]];
            r2 += z[k] * z[k];
        }
        let v = wt * bump(r2);
        if v > 0.0 {
            out.push((z, v));
            sum += v;
        }
        for k in 0..dims {
            idx[k] += 1;
            if idx[k] < KERNEL_PTS {
                break;
            }
            idx[k] = 0;
        }
    }
    for p in out.iter_mut() {
        p.1 /= sum;
    }
    out
}

impl ViscousPotential {
    pub fn new(kind: PotentialKind, delta: f64) -> Result<Self> {
        match kind {
            PotentialKind::Newtonian { mu, eta } => {
                if !(mu > 0.0) || !(eta >= 0.0) {
                    return Err(domain("Newtonian potential needs mu > 0, eta >= 0"));
                }
            }
            PotentialKind::PPotential { mu0, mu1, p } => {
                if !(mu0 > 0.0) || !(mu1 >= 0.0) || !(p > 1.0) {
                    return Err(domain("p-potential needs mu0 > 0, mu1 >= 0, p > 1"));
                }
            }
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(domain("mollification radius must be nonnegative"));
        }
        let kernel2 = if delta > 0.0 { kernel_points(3) } else { Vec::new() };
        Ok(ViscousPotential { kind, delta, kernel2 })
    }

    pub fn newtonian(mu: f64, eta: f64) -> Result<Self> {
        Self::new(PotentialKind::Newtonian { mu, eta }, 0.0)
    }

    pub fn p_potential(mu0: f64, mu1: f64, p: f64) -> Result<Self> {
        Self::new(PotentialKind::PPotential { mu0, mu1, p }, 0.0)
    }

    /// Same potential with a different mollification radius.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.kind, delta)
    }

    fn raw_f(&self, d: &SymMatrix) -> f64 {
        match self.kind {
            PotentialKind::Newtonian { mu, eta } => {
                let d0 = d.deviatoric();
                let t = d.trace();
                mu * d0.ddot(&d0) + eta * t * t
            }
            PotentialKind::PPotential { mu0, mu1, p } => {
                let d0 = d.deviatoric();
                let s = d0.ddot(&d0);
                mu0 / p * (pow(mu1 + s, 0.5 * p) - pow(mu1, 0.5 * p))
            }
        }
    }

    fn raw_grad(&self, d: &SymMatrix) -> SymMatrix {
        match self.kind {
            PotentialKind::Newtonian { mu, eta } => {
                d.deviatoric() * (2.0 * mu) + SymMatrix::identity(d.d) * (2.0 * eta * d.trace())
            }
            PotentialKind::PPotential { mu0, mu1, p } => {
                let d0 = d.deviatoric();
                let s = d0.ddot(&d0);
                if mu1 + s == 0.0 {
                    return SymMatrix::zeros(d.d);
                }
                d0 * (mu0 * pow(mu1 + s, 0.5 * (p - 2.0)))
            }
        }
    }

    fn is_quadratic(&self) -> bool {
        matches!(self.kind, PotentialKind::Newtonian { .. })
    }

    fn for_each_kernel_point<G: FnMut(SymMatrix, f64)>(&self, delta: f64, dim: usize, mut g: G) {
        let n = SymMatrix::dof(dim);
        let visit = |pts: &[([f64; 6], f64)], g: &mut G| {
            let mut c = [0.0; 6];
            for (z, w) in pts {
                for k in 0..n {
                    c[k] = delta * z[k];
                }
                g(SymMatrix::from_coords(dim, &c[..n]), *w);
            }
        };
        if dim == 2 && !self.kernel2.is_empty() {
            visit(&self.kernel2, &mut g);
        } else {
            let pts = kernel_points(n);
            visit(&pts, &mut g);
        }
    }

    /// Mollified potential F_δ(D) by tensor Gauss quadrature of the convolution.
    pub fn mollify(&self, delta: f64, d: &SymMatrix) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(domain("mollification radius must be positive"));
        }
        let tmp;
        let src = if delta == self.delta && d.d == 2 && !self.kernel2.is_empty() {
            self
        } else {
            tmp = ViscousPotential {
                kind: self.kind,
                delta,
                kernel2: if d.d == 2 { kernel_points(3) } else { Vec::new() },
            };
            &tmp
        };
        let mut s = 0.0;
        src.for_each_kernel_point(delta, d.d, |y, w| {
            s += w * (src.raw_f(&(*d - y)) - src.raw_f(&(-y)));
        });
        Ok(s)
    }

    /// F(D), or F_δ(D) when δ > 0.
    pub fn evaluate_f(&self, d: &SymMatrix) -> f64 {
        if self.delta > 0.0 && !self.is_quadratic() {
            let mut s = 0.0;
            self.for_each_kernel_point(self.delta, d.d, |y, w| {
                s += w * (self.raw_f(&(*d - y)) - self.raw_f(&(-y)));
            });
            s
        } else {
            // quadratics are reproduced exactly by the symmetric normalized kernel
            self.raw_f(d)
        }
    }

    /// One element of ∂F(D) (the gradient of F_δ when δ > 0).
    pub fn subdifferential(&self, d: &SymMatrix) -> SymMatrix {
        if self.delta > 0.0 && !self.is_quadratic() {
            let mut s = SymMatrix::zeros(d.d);
            self.for_each_kernel_point(self.delta, d.d, |y, w| {
                s = s + self.raw_grad(&(*d - y)) * w;
            });
            s
        } else {
            self.raw_grad(d)
        }
    }

    /// Fenchel conjugate F*(S).
    pub fn conjugate(&self, s: &SymMatrix) -> Result<f64> {
        let dim = s.d as f64;
        let s0 = s.deviatoric();
        let tr = s.trace();
        let n0 = s0.norm();
        match self.kind {
            PotentialKind::Newtonian { mu, eta } => {
                let mut v = n0 * n0 / (4.0 * mu);
                if eta == 0.0 {
                    if fabs(tr) > 1e-12 * (1.0 + s.norm()) {
                        return Err(trace_error(s));
                    }
                } else {
                    v += tr * tr / (4.0 * eta * dim * dim);
                }
                Ok(v)
            }
            PotentialKind::PPotential { .. } => {
                if fabs(tr) > 1e-12 * (1.0 + s.norm()) {
                    return Err(trace_error(s));
                }
                if n0 == 0.0 {
                    return Ok(0.0);
                }
                let dir = s0 * (1.0 / n0);
                let g = |t: f64| t * n0 - self.evaluate_f(&(dir * t));
                let mut hi = 1.0;
                let mut g_hi = g(hi);
                for _ in 0..2000 {
                    let g2 = g(2.0 * hi);
                    if g2 <= g_hi {
                        break;
                    }
                    hi *= 2.0;
                    g_hi = g2;
                }
                let (_, v) = golden_max(g, 0.0, 2.0 * hi, 1e-10);
                Ok(v.max(0.0))
            }
        }
    }

    /// F(D) + F*(S) − S:D.
    pub fn fenchel_young_gap(&self, d: &SymMatrix, s: &SymMatrix) -> Result<f64> {
        Ok(self.evaluate_f(d) + self.conjugate(s)? - s.ddot(d))
    }

    /// Coercivity pair (μ, q) with F(D) ≥ μ|D₀|^q whenever |D₀| > 1.
    pub fn coercivity(&self) -> (f64, f64) {
        match self.kind {
            PotentialKind::Newtonian { mu, .. } => (mu, 2.0),
            PotentialKind::PPotential { mu0, mu1, p } => {
                if p >= 2.0 || mu1 == 0.0 {
                    (mu0 / p, p)
                } else {
                    (mu0 / p * (0.5 * p * pow(1.0 + mu1, 0.5 * (p - 2.0))).min(1.0), p)
                }
            }
        }
    }

    /// Young function A_R bounding the Bregman gap of F on |D| ≤ R from below.
    pub fn build_a_r(&self, r: f64) -> Result<YoungFunction> {
        if !(r > 0.0) {
            return Err(domain("R must be positive"));
        }
        let kind = match self.kind {
            PotentialKind::Newtonian { mu, .. } => YoungKind::Power { c: 0.5 * mu, p: 2.0 },
            PotentialKind::PPotential { mu0, p, .. } if p >= 2.0 => YoungKind::Power {
                c: mu0 / (p * (pow(2.0, p - 1.0) - 1.0)),
                p,
            },
            PotentialKind::PPotential { mu0, mu1, p } => {
                // lower bound c' min(z², z^p), from the Hessian along the segment
                let bound = 0.5 * mu0 * (p - 1.0) * pow(sqrt(mu1) + r + 1.0, p - 2.0);
                let (c, alpha, beta) = two_branch_constants(bound, p)?;
                YoungKind::TwoBranch { c, p, alpha, beta }
            }
        };
        Ok(YoungFunction { kind, r })
    }

    /// min over samples of F(D+Q) − F(D) − ∂F(D):Q − A_R(|Q₀|) with |D| ≤ R.
    pub fn check_coercivity_s5(&self, r: f64, dim: usize, trials: usize, seed: u64) -> Result<f64> {
        if trials == 0 {
            return Err(domain("need at least one trial"));
        }
        let a = self.build_a_r(r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for k in 0..trials {
            let dn = r * rng.gen::<f64>();
            let d = random_sym(&mut rng, dim, dn);
            // spread |Q| over several decades to visit both branches
            let qn = if k == 0 { 0.0 } else { pow(10.0, rng.gen_range(-3.0..2.0)) };
            let q = random_sym(&mut rng, dim, qn);
            let s = self.subdifferential(&d);
            let lhs = self.evaluate_f(&(d + q)) - self.evaluate_f(&d) - s.ddot(&q);
            worst = worst.min(lhs - a.eval(q.deviatoric().norm()));
        }
        Ok(worst)
    }
}

fn trace_error(s: &SymMatrix) -> Error {
    let mut dir = vec![0.0; SymMatrix::dof(s.d)];
    SymMatrix::identity(s.d).to_coords(&mut dir);
    Error::ConjugateDomain {
        message: format!("stress has trace {} outside the effective domain", s.trace()),
        direction: dir,
    }
}

/// Uniformly oriented symmetric matrix with Frobenius norm `norm`.
pub fn random_sym<R: Rng>(rng: &mut R, dim: usize, norm: f64) -> SymMatrix {
    let n = SymMatrix::dof(dim);
    let mut c = [0.0; 6];
    let mut len2 = 0.0;
    while len2 < 1e-12 {
        len2 = 0.0;
        for v in c.iter_mut().take(n) {
            // Box–Muller keeps the direction isotropic
            let u1: f64 = rng.gen_range(1e-300..1.0);
            let u2: f64 = rng.gen();
            *v = sqrt(-2.0 * log(u1)) * crate::math::cos(2.0 * crate::math::PI * u2);
            len2 += *v * *v;
        }
    }
    let s = norm / sqrt(len2);
    for v in c.iter_mut().take(n) {
        *v *= s;
    }
    SymMatrix::from_coords(dim, &c[..n])
}

/// Largest c ≤ min(bound, 1/2) such that the two-branch function with
/// value- and slope-matching at z = 1 stays below bound·z^p for z ≥ 1.
fn two_branch_constants(bound: f64, p: f64) -> Result<(f64, f64, f64)> {
    let params = |c: f64| {
        let alpha = c * (2.0 - p) / (1.0 - c * p);
        (alpha, alpha * (1.0 - c))
    };
    let ok = |c: f64| {
        let (alpha, _) = params(c);
        alpha > 0.0 && alpha < 1.0 && c * (1.0 - alpha) + alpha <= bound
    };
    let mut lo = 0.0;
    let mut hi = bound.min(0.5) * (1.0 - 1e-12);
    if ok(hi) {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let c = lo;
    let (alpha, beta) = params(c);
    if !(c > 0.0 && alpha > 0.0 && alpha < 1.0 && beta > 0.0) {
        return Err(Error::Structural(format!(
            "no admissible (alpha, beta) for p = {p}"
        )));
    }
    Ok((c, alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungKind {
    /// c z^p
    Power { c: f64, p: f64 },
    /// c z² on [0,1]; c(1−α) z^p + α z − β beyond
    TwoBranch { c: f64, p: f64, alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungFunction {
    pub kind: YoungKind,
    pub r: f64,
}

impl YoungFunction {
    pub fn eval(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match self.kind {
            YoungKind::Power { c, p } => c * pow(z, p),
            YoungKind::TwoBranch { c, p, alpha, beta } => {
                if z <= 1.0 {
                    c * z * z
                } else {
                    c * (1.0 - alpha) * pow(z, p) + alpha * z - beta
                }
            }
        }
    }

    /// Sharpest (a₁, a₂) with a₁A(z) ≤ A(2z) ≤ a₂A(z) on a log grid of [lo, hi].
    pub fn delta22(&self, lo: f64, hi: f64, count: usize) -> (f64, f64) {
        let (mut a1, mut a2) = (f64::INFINITY, 0.0f64);
        for i in 0..count {
            let z = exp(log(lo) + (log(hi) - log(lo)) * i as f64 / (count - 1).max(1) as f64);
            let r = self.eval(2.0 * z) / self.eval(z);
            a1 = a1.min(r);
            a2 = a2.max(r);
        }
        (a1, a2)
    }

    /// Worst midpoint-convexity defect A((x+y)/2) − (A(x)+A(y))/2 on a grid of [0, hi].
    pub fn midpoint_convexity_defect(&self, hi: f64, count: usize) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..count {
            for j in i..count {
                let x = hi * i as f64 / (count - 1) as f64;
                let y = hi * j as f64 / (count - 1) as f64;
                let d = self.eval(0.5 * (x + y)) - 0.5 * (self.eval(x) + self.eval(y));
                worst = worst.max(d);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev_unit2() -> SymMatrix {
        // |D₀| = 1, traceless
        SymMatrix::from_rows2(1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt())
    }

    #[test]
    fn evaluate_examples() {
        let n = ViscousPotential::newtonian(1.0, 0.0).unwrap();
        assert!(n.evaluate_f(&SymMatrix::identity(2)).abs() < 1e-15);
        assert_eq!(n.evaluate_f(&SymMatrix::zeros(2)), 0.0);
        let pp = ViscousPotential::p_potential(2.0, 0.0, 3.0).unwrap();
        assert!((pp.evaluate_f(&dev_unit2()) - 2.0 / 3.0).abs() < 1e-14);
        let pp = ViscousPotential::p_potential(1.0, 0.5, 1.5).unwrap();
        assert_eq!(pp.evaluate_f(&SymMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn newtonian_gradient_matches_finite_differences() {
        let pot = ViscousPotential::newtonian(1.3, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = random_sym(&mut rng, 3, 2.0);
            let g = pot.subdifferential(&d);
            let mut c = [0.0; 6];
            d.to_coords(&mut c);
            let mut gc = [0.0; 6];
            g.to_coords(&mut gc);
            for k in 0..6 {
                let h = 1e-6;
                let (mut cp, mut cm) = (c, c);
                cp[k] += h;
                cm[k] -= h;
                let fd = (pot.evaluate_f(&SymMatrix::from_coords(3, &cp))
                    - pot.evaluate_f(&SymMatrix::from_coords(3, &cm)))
                    / (2.0 * h);
                assert!((fd - gc[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kink_subgradient_is_zero() {
        let pot = ViscousPotential::p_potential(1.0, 0.0, 1.5).unwrap();
        assert_eq!(pot.subdifferential(&SymMatrix::zeros(2)).norm(), 0.0);
    }

    #[test]
    fn conjugate_examples() {
        let n = ViscousPotential::newtonian(1.0, 1.0).unwrap();
        assert_eq!(n.conjugate(&SymMatrix::zeros(2)).unwrap(), 0.0);
        let n0 = ViscousPotential::newtonian(1.0, 0.0).unwrap();
        assert!((n0.conjugate(&(dev_unit2() * 2.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            n0.conjugate(&SymMatrix::identity(2)),
            Err(Error::ConjugateDomain { .. })
        ));
        let pp = ViscousPotential::p_potential(1.0, 0.0, 2.0).unwrap();
        let s = dev_unit2() * 1.7;
        assert!((pp.conjugate(&s).unwrap() - 0.5 * 1.7 * 1.7).abs() < 1e-9);
    }

    #[test]
    fn newtonian_trace_conjugate_uses_dimension_squared() {
        // S = 2η tr(D) I for D = I in d = 3: F = 9η, S:D = 18η, so F* = 9η
        let eta = 0.7;
        let pot = ViscousPotential::newtonian(1.0, eta).unwrap();
        let d = SymMatrix::identity(3);
        let s = pot.subdifferential(&d);
        assert!((pot.conjugate(&s).unwrap() - 9.0 * eta).abs() < 1e-12);
    }

    #[test]
    fn mollified_quadratic_is_unchanged() {
        let pot = ViscousPotential::newtonian(1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let d = random_sym(&mut rng, 2, 1.5);
            let m = pot.mollify(0.3, &d).unwrap();
            assert!((m - pot.evaluate_f(&d)).abs() < 1e-8);
        }
        assert_eq!(pot.mollify(0.3, &SymMatrix::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn mollification_converges() {
        let pot = ViscousPotential::p_potential(1.0, 0.0, 1.5).unwrap();
        let d = SymMatrix::from_rows2(0.3, 0.2, -0.1);
        let f = pot.evaluate_f(&d);
        let errs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&dl| (pot.mollify(dl, &d).unwrap() - f).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn young_examples() {
        let a = ViscousPotential::newtonian(2.0, 0.0).unwrap().build_a_r(1.0).unwrap();
        assert!((a.eval(3.0) - 9.0).abs() < 1e-14);
        let a = ViscousPotential::p_potential(2.0, 0.0, 1.5)
            .unwrap()
            .build_a_r(1.0)
            .unwrap();
        let left = a.eval(1.0 - 1e-12);
        let right = a.eval(1.0 + 1e-12);
        assert!((left - right).abs() < 1e-9);
        assert!(a.midpoint_convexity_defect(10.0, 200) <= 1e-9);
    }

    #[test]
    fn two_branch_matches_value_and_slope() {
        let (c, alpha, beta) = two_branch_constants(0.3, 1.5).unwrap();
        assert!((c * (1.0 - alpha) + alpha - beta - c).abs() < 1e-14);
        assert!((c * (1.0 - alpha) * 1.5 + alpha - 2.0 * c).abs() < 1e-14);
    }
}
