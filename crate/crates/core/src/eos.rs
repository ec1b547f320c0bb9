//! Barotropic pressure laws and their pressure potentials.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::math::{exp, fabs, gauss_legendre, log, pow};

#[derive(Debug, Clone, PartialEq)]
pub enum EosKind {
    Isentropic { a: f64, gamma: f64 },
    IsentropicPlusLinear { a: f64, gamma: f64, b: f64 },
    Tabulated(Table),
}

/// Monotone cubic interpolant of a sampled law in log–log coordinates,
/// with power-law extensions below the first and above the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    lx: Vec<f64>,
    ly: Vec<f64>,
    slope: Vec<f64>,
    // ∫_0^{ρ_k} p(s)/s² ds at each sample
    cumulative: Vec<f64>,
    head_exponent: f64,
    tail_exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureLaw {
    pub kind: EosKind,
    pub a_lower: f64,
    pub a_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    /// Most adverse value seen (negative means violation for convexity checks).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub monotone: Check,
    pub lower_convex: Check,
    pub upper_convex: Check,
    pub coercivity: Check,
    /// Fitted constant a in P(ρ) ≥ a ρ^{1+1/ā} on [1, 10³].
    pub coercivity_constant: f64,
    pub potential_finite: bool,
}

impl StructureReport {
    pub fn all_pass(&self) -> bool {
        self.potential_finite
            && self.monotone.pass
            && self.lower_convex.pass
            && self.upper_convex.pass
            && self.coercivity.pass
    }
}

const GAUSS_PTS: usize = 8;

impl Table {
    /// Builds the interpolant from (ρ, p) samples. A leading (0, 0) sample is
    /// allowed and dropped.
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .copied()
            .filter(|&(r, _)| r != 0.0)
            .collect();
        if pts.len() < 2 {
            return Err(Error::Structural("table needs two positive samples".into()));
        }
        for (i, &(r, p)) in pts.iter().enumerate() {
            if !(r > 0.0) || !(p > 0.0) || !r.is_finite() || !p.is_finite() {
                return Err(Error::Structural(format!(
                    "sample {i} ({r}, {p}) must have positive density and pressure"
                )));
            }
            if i > 0 && r <= pts[i - 1].0 {
                return Err(Error::Structural("densities must be strictly increasing".into()));
            }
        }
        let lx: Vec<f64> = pts.iter().map(|s| log(s.0)).collect();
        let ly: Vec<f64> = pts.iter().map(|s| log(s.1)).collect();
        let n = lx.len();
        let sec: Vec<f64> = (0..n - 1)
            .map(|k| (ly[k + 1] - ly[k]) / (lx[k + 1] - lx[k]))
            .collect();
        // Fritsch–Carlson slopes; endpoints take the adjacent secant so the
        // power-law extensions join with matching derivative
        let mut slope = alloc::vec![0.0; n];
        slope[0] = sec[0];
        slope[n - 1] = sec[n - 2];
        for k in 1..n - 1 {
            let (s0, s1) = (sec[k - 1], sec[k]);
            if s0 * s1 <= 0.0 {
                slope[k] = 0.0;
            } else {
                let h0 = lx[k] - lx[k - 1];
                let h1 = lx[k + 1] - lx[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slope[k] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }
        let head_exponent = sec[0];
        let tail_exponent = sec[n - 2];
        let mut t = Table {
            lx,
            ly,
            slope,
            cumulative: alloc::vec![0.0; n],
            head_exponent,
            tail_exponent,
        };
        if head_exponent > 1.0 {
            let mut acc = exp(t.ly[0] - t.lx[0]) / (head_exponent - 1.0);
            t.cumulative[0] = acc;
            for k in 0..n - 1 {
                acc += t.interval_integral(k, t.lx[k + 1]);
                t.cumulative[k + 1] = acc;
            }
        } else {
            for c in t.cumulative.iter_mut() {
                *c = f64::INFINITY;
            }
        }
        Ok(t)
    }

    /// Local log–log interpolant value and slope on interval k at log density x.
    fn hermite(&self, k: usize, x: f64) -> (f64, f64) {
        let h = self.lx[k + 1] - self.lx[k];
        let s = (x - self.lx[k]) / h;
        let (y0, y1) = (self.ly[k], self.ly[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let dy = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (y, dy)
    }

    /// ∫ p(s)/s² ds from sample k to exp(x), computed in x = log s.
    fn interval_integral(&self, k: usize, x: f64) -> f64 {
        let (gx, gw) = gauss_legendre(GAUSS_PTS);
        let a = self.lx[k];
        let half = 0.5 * (x - a);
        let mid = 0.5 * (x + a);
        let mut s = 0.0;
        for i in 0..GAUSS_PTS {
            let xi = mid + half * gx[i];
            let (y, _) = self.hermite(k, xi);
            s += gw[i] * exp(y - xi);
        }
        s * half
    }

    fn locate(&self, x: f64) -> usize {
        // largest k with lx[k] <= x, clamped to interval range
        let n = self.lx.len();
        match self.lx.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// (log p, d log p / d log ρ) at ρ > 0.
    fn log_eval(&self, rho: f64) -> (f64, f64) {
        let x = log(rho);
        let n = self.lx.len();
        if x <= self.lx[0] {
            (self.ly[0] + self.head_exponent * (x - self.lx[0]), self.head_exponent)
        } else if x >= self.lx[n - 1] {
            (
                self.ly[n - 1] + self.tail_exponent * (x - self.lx[n - 1]),
                self.tail_exponent,
            )
        } else {
            self.hermite(self.locate(x), x)
        }
    }

    fn pressure(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        exp(self.log_eval(rho).0)
    }

    fn pressure_prime(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        let (y, dy) = self.log_eval(rho);
        exp(y) * dy / rho
    }

    /// ∫_0^ρ p(s)/s² ds
    fn primitive(&self, rho: f64) -> f64 {
        if !(self.head_exponent > 1.0) {
            return f64::INFINITY;
        }
        if rho == 0.0 {
            return 0.0;
        }
        let x = log(rho);
        let n = self.lx.len();
        if x <= self.lx[0] {
            let p = self.pressure(rho);
            p / rho / (self.head_exponent - 1.0)
        } else if x >= self.lx[n - 1] {
            let base = self.cumulative[n - 1];
            let k = self.tail_exponent;
            let (r0, p0) = (exp(self.lx[n - 1]), exp(self.ly[n - 1]));
            if fabs(k - 1.0) < 1e-14 {
                base + p0 / r0 * (x - self.lx[n - 1])
            } else {
                base + p0 / r0 * (pow(rho / r0, k - 1.0) - 1.0) / (k - 1.0)
            }
        } else {
            let k = self.locate(x);
            self.cumulative[k] + self.interval_integral(k, x)
        }
    }

    pub fn head_exponent(&self) -> f64 {
        self.head_exponent
    }
}

impl PressureLaw {
    /// γ-law with the isentropic constants a̲ = ā = 1/(γ−1).
    pub fn isentropic(a: f64, gamma: f64) -> Result<Self> {
        Self::with_constants(
            EosKind::Isentropic { a, gamma },
            1.0 / (gamma - 1.0),
            1.0 / (gamma - 1.0),
        )
    }

    pub fn with_constants(kind: EosKind, a_lower: f64, a_upper: f64) -> Result<Self> {
        match &kind {
            EosKind::Isentropic { a, gamma } | EosKind::IsentropicPlusLinear { a, gamma, .. } => {
                if !(*a > 0.0) || !(*gamma > 1.0) {
                    return Err(domain("need a > 0 and gamma > 1"));
                }
            }
            EosKind::Tabulated(_) => {}
        }
        if let EosKind::IsentropicPlusLinear { b, .. } = &kind {
            if !(*b >= 0.0) {
                return Err(domain("linear coefficient b must be nonnegative"));
            }
        }
        if !(a_lower > 0.0) || !(a_upper > 0.0) {
            return Err(domain("structural constants must be positive"));
        }
        Ok(PressureLaw {
            kind,
            a_lower,
            a_upper,
        })
    }

    pub fn tabulated(samples: &[(f64, f64)], a_lower: f64, a_upper: f64) -> Result<Self> {
        Self::with_constants(EosKind::Tabulated(Table::new(samples)?), a_lower, a_upper)
    }

    fn check_rho(rho: f64) -> Result<()> {
        if rho >= 0.0 && rho.is_finite() {
            Ok(())
        } else {
            Err(domain(format!("density {rho} must be nonnegative")))
        }
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        Ok(self.p(rho))
    }

    pub fn potential(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        let v = self.pot(rho);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Structural(
                "p(s)/s^2 is not integrable at vacuum; pressure potential diverges".into(),
            ))
        }
    }

    pub fn relative_potential(&self, rho: f64, rho_tilde: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        if !(rho_tilde > 0.0) {
            return Err(domain("reference density must be positive"));
        }
        self.potential(rho_tilde)?;
        Ok(self.bregman(rho, rho_tilde))
    }

    /// p(ρ) for ρ ≥ 0, unchecked.
    pub fn p(&self, rho: f64) -> f64 {
        match &self.kind {
            EosKind::Isentropic { a, gamma } => a * pow(rho, *gamma),
            EosKind::IsentropicPlusLinear { a, gamma, b } => a * pow(rho, *gamma) + b * rho,
            EosKind::Tabulated(t) => t.pressure(rho),
        }
    }

    /// p'(ρ)
    pub fn dp(&self, rho: f64) -> f64 {
        match &self.kind {
            EosKind::Isentropic { a, gamma } => a * gamma * pow(rho, gamma - 1.0),
            EosKind::IsentropicPlusLinear { a, gamma, b } => a * gamma * pow(rho, gamma - 1.0) + b,
            EosKind::Tabulated(t) => t.pressure_prime(rho),
        }
    }

    /// P(ρ), normalized so P(0) = 0.
    pub fn pot(&self, rho: f64) -> f64 {
        match &self.kind {
            EosKind::Isentropic { a, gamma } => a / (gamma - 1.0) * pow(rho, *gamma),
            EosKind::IsentropicPlusLinear { a, gamma, b } => {
                let lin = if rho > 0.0 { b * rho * log(rho) } else { 0.0 };
                a / (gamma - 1.0) * pow(rho, *gamma) + lin
            }
            EosKind::Tabulated(t) => rho * t.primitive(rho),
        }
    }

    /// P'(ρ)
    pub fn dpot(&self, rho: f64) -> f64 {
        match &self.kind {
            EosKind::Isentropic { a, gamma } => a * gamma / (gamma - 1.0) * pow(rho, gamma - 1.0),
            EosKind::IsentropicPlusLinear { a, gamma, b } => {
                a * gamma / (gamma - 1.0) * pow(rho, gamma - 1.0) + b * (log(rho) + 1.0)
            }
            EosKind::Tabulated(t) => {
                if rho == 0.0 {
                    t.primitive(0.0)
                } else {
                    t.primitive(rho) + t.pressure(rho) / rho
                }
            }
        }
    }

    /// P''(ρ) = p'(ρ)/ρ
    pub fn ddpot(&self, rho: f64) -> f64 {
        self.dp(rho) / rho
    }

    /// Bregman distance P(ρ) − P'(ρ̃)(ρ − ρ̃) − P(ρ̃), unchecked.
    pub fn bregman(&self, rho: f64, rho_tilde: f64) -> f64 {
        let v = self.pot(rho) - self.dpot(rho_tilde) * (rho - rho_tilde) - self.pot(rho_tilde);
        v.max(0.0)
    }

    /// Pressure Bregman p(ρ) − p'(ρ̃)(ρ − ρ̃) − p(ρ̃).
    pub fn pressure_bregman(&self, rho: f64, rho_tilde: f64) -> f64 {
        self.p(rho) - self.dp(rho_tilde) * (rho - rho_tilde) - self.p(rho_tilde)
    }

    /// γ-law exponent when the law is of that form.
    pub fn gamma(&self) -> Option<f64> {
        match &self.kind {
            EosKind::Isentropic { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }

    /// Defect compatibility constants (d̲, d̄) with d̲𝔈 ≤ tr ℜ ≤ d̄𝔈.
    pub fn compatibility_constants(&self, d: usize) -> (f64, f64) {
        (d as f64 / self.a_upper, d as f64 / self.a_lower)
    }

    pub fn check_structure(&self, sample_count: usize) -> Result<StructureReport> {
        if sample_count < 3 {
            return Err(domain("need at least three samples"));
        }
        let (lo, hi) = (log(1e-4), log(1e4));
        let grid: Vec<f64> = (0..sample_count)
            .map(|i| exp(lo + (hi - lo) * i as f64 / (sample_count - 1) as f64))
            .collect();
        let finite = grid.iter().all(|&r| self.pot(r).is_finite()) && self.pot(1.0).is_finite();

        let mut mono = Check { pass: true, worst: f64::INFINITY };
        for w in grid.windows(2) {
            let d = self.p(w[1]) - self.p(w[0]);
            let rel = d / (fabs(self.p(w[1])) + fabs(self.p(w[0]))).max(1e-300);
            mono.worst = mono.worst.min(rel);
            if !(d > 0.0) {
                mono.pass = false;
            }
        }

        let lower = self.convexity(&grid, |r| self.pot(r) - self.a_lower * self.p(r));
        let upper = self.convexity(&grid, |r| self.a_upper * self.p(r) - self.pot(r));

        let gp = 1.0 + 1.0 / self.a_upper;
        let mut fitted = f64::INFINITY;
        for i in 0..sample_count {
            let r = exp(log(1e3) * i as f64 / (sample_count - 1) as f64);
            fitted = fitted.min(self.pot(r) / pow(r, gp));
        }
        let coercivity = Check {
            pass: finite && fitted > 0.0 && fitted.is_finite(),
            worst: fitted,
        };
        Ok(StructureReport {
            monotone: mono,
            lower_convex: Check { pass: finite && lower.pass, worst: lower.worst },
            upper_convex: Check { pass: finite && upper.pass, worst: upper.worst },
            coercivity,
            coercivity_constant: fitted,
            potential_finite: finite,
        })
    }

    fn convexity<F: Fn(f64) -> f64>(&self, grid: &[f64], f: F) -> Check {
        let mut c = Check { pass: true, worst: f64::INFINITY };
        for w in grid.windows(3) {
            let (x0, x1, x2) = (w[0], w[1], w[2]);
            let (f0, f1, f2) = (f(x0), f(x1), f(x2));
            let dd = 2.0 * ((f2 - f1) / (x2 - x1) - (f1 - f0) / (x1 - x0)) / (x2 - x0);
            // local scale: size of the individual terms entering the difference
            let mag = [x0, x1, x2]
                .iter()
                .map(|&r| fabs(self.pot(r)) + (self.a_lower + self.a_upper) * fabs(self.p(r)))
                .fold(0.0, f64::max);
            let scale = mag / ((x1 - x0) * (x2 - x1));
            let rel = if scale > 0.0 { dd / scale } else { dd };
            if !rel.is_finite() || rel < -1e-10 {
                c.pass = false;
            }
            c.worst = c.worst.min(if rel.is_finite() { rel } else { f64::NEG_INFINITY });
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma2() -> PressureLaw {
        PressureLaw::isentropic(1.0, 2.0).unwrap()
    }

    #[test]
    fn pressure_examples() {
        let l = gamma2();
        assert_eq!(l.pressure(0.0).unwrap(), 0.0);
        assert!((l.pressure(1.5).unwrap() - 1.5 * 1.5).abs() < 1e-15);
        let lin = PressureLaw::with_constants(
            EosKind::IsentropicPlusLinear { a: 2.0, gamma: 1.4, b: 0.5 },
            2.5,
            2.5,
        )
        .unwrap();
        assert!((lin.pressure(1.0).unwrap() - 2.5).abs() < 1e-15);
        assert!(matches!(l.pressure(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn potential_examples() {
        let l = gamma2();
        assert!((l.potential(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(l.potential(0.0).unwrap(), 0.0);
        let r = 1.3;
        let h = 1e-5;
        let dp = (l.pot(r + h) - l.pot(r - h)) / (2.0 * h);
        assert!((dp * r - l.pot(r) - l.p(r)).abs() < 1e-6);
    }

    #[test]
    fn relative_potential_examples() {
        let l = gamma2();
        assert!(l.relative_potential(1.7, 1.7).unwrap().abs() < 1e-14);
        assert!((l.relative_potential(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((l.relative_potential(0.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(l.relative_potential(1.0, 0.0).is_err());
    }

    #[test]
    fn linear_extension_satisfies_defining_identity() {
        let l = PressureLaw::with_constants(
            EosKind::IsentropicPlusLinear { a: 2.0, gamma: 1.4, b: 0.5 },
            2.5,
            2.5,
        )
        .unwrap();
        for &r in &[0.2, 1.0, 3.7] {
            assert!((l.dpot(r) * r - l.pot(r) - l.p(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_reproduces_power_law() {
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let r = 0.01 * 1.3f64.powi(i);
                (r, 1.0 * r.powf(1.4))
            })
            .collect();
        let t = PressureLaw::tabulated(&samples, 2.5, 2.5).unwrap();
        let exact = PressureLaw::isentropic(1.0, 1.4).unwrap();
        for &r in &[1e-4, 0.05, 0.7, 3.3, 200.0, 1e4] {
            let rel = (t.pot(r) - exact.pot(r)).abs() / exact.pot(r);
            assert!(rel < 1e-6, "rho {r}: rel {rel}");
            assert!((t.p(r) - exact.p(r)).abs() / exact.p(r) < 1e-10);
        }
    }

    #[test]
    fn linear_table_flags_diverging_potential() {
        let samples: Vec<(f64, f64)> = (1..20).map(|i| (i as f64 * 0.5, i as f64 * 0.5)).collect();
        let t = PressureLaw::tabulated(&samples, 1.0, 1.0).unwrap();
        assert!(matches!(t.potential(1.0), Err(Error::Structural(_))));
        let rep = t.check_structure(50).unwrap();
        assert!(!rep.all_pass());
        assert!(!rep.coercivity.pass);
    }

    #[test]
    fn structure_passes_for_gamma_laws() {
        for &g in &[1.4, 2.0, 3.0] {
            let rep = PressureLaw::isentropic(1.0, g).unwrap().check_structure(200).unwrap();
            assert!(rep.all_pass(), "gamma {g}: {rep:?}");
        }
    }

    #[test]
    fn wrong_constants_fail_convexity() {
        // ā below 1/(γ−1) makes ā p − P concave
        let l = PressureLaw::with_constants(EosKind::Isentropic { a: 1.0, gamma: 2.0 }, 0.5, 0.5).unwrap();
        let rep = l.check_structure(100).unwrap();
        assert!(!rep.upper_convex.pass);
    }
}
