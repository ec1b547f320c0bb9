//! Small numerical kernels: quadrature rules, 1-D maximization, LU solvers.

use alloc::vec;
use alloc::vec::Vec;

pub use libm::{cos, exp, fabs, log, pow, sin, sqrt};

pub const PI: f64 = core::f64::consts::PI;

#[inline]
pub fn neg_part(z: f64) -> f64 {
    if z < 0.0 {
        z
    } else {
        0.0
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if fabs(dz) < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Maximizes a unimodal function on [a, b] by golden-section search.
/// Returns (argmax, max).
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let g = (sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if fabs(b - a) <= rel_tol * (fabs(a) + fabs(b)).max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (xm, fm) = if fc > fd { (c, fc) } else { (d, fd) };
    let (fa, fb) = (f(a), f(b));
    let mut best = (xm, fm);
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    best
}

/// Dense LU factorization with partial pivoting, row-major n×n.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Returns `None` when a pivot is exactly zero or not finite.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv = vec![0; n];
        for k in 0..n {
            let mut p = k;
            let mut best = fabs(a[k * n + k]);
            for i in k + 1..n {
                let v = fabs(a[i * n + k]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let akk = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / akk;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Some(DenseLu { n, lu: a, piv })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row i stores columns i-kl ..= i+ku+kl; the extra kl slots absorb fill-in
/// from row pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[self.slot(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    /// In-place LU with partial pivoting. Returns the row permutation, or
    /// `None` on a vanishing pivot.
    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = fabs(self.data[self.slot(k, k)]);
            for i in k + 1..=last {
                let v = fabs(self.data[self.slot(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let akk = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let l = self.data[s] / akk;
                self.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let ukj = self.data[self.slot(k, j)];
                        let t = self.slot(i, j);
                        self.data[t] -= l * ukj;
                    }
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + a.kl).min(n - 1);
            let bk = b[k];
            for i in k + 1..=last {
                b[i] -= a.data[a.slot(i, k)] * bk;
            }
        }
        let reach = a.ku + a.kl;
        for i in (0..n).rev() {
            let jmax = (i + reach).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jmax {
                s -= a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
    }
}

/// Fourth-order five-point derivative of a scalar closure.
pub fn diff5<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        // degree 12 monomial: ∫ x^12 = 2/13
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, -1.0, 4.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn band_lu_matches_dense() {
        let n = 9;
        let mut band = BandMatrix::zeros(n, 3, 3);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i.saturating_sub(3)..=(i + 3).min(n - 1) {
                // deliberately small diagonal to force pivoting
                let v = if i == j { 0.01 } else { 1.0 / (1.0 + i as f64 + 2.0 * j as f64) };
                band.add(i, j, v);
                dense[i * n + j] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut xb = rhs.clone();
        band.clone().factor().unwrap().solve(&mut xb);
        let mut xd = rhs.clone();
        DenseLu::factor(n, dense).unwrap().solve(&mut xd);
        for i in 0..n {
            assert!((xb[i] - xd[i]).abs() < 1e-10, "{i}: {} vs {}", xb[i], xd[i]);
        }
        let mut y = vec![0.0; n];
        band.mul_vec(&xb, &mut y);
        for i in 0..n {
            assert!((y[i] - rhs[i]).abs() < 1e-12);
        }
    }
}
