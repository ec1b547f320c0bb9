//! Symmetric d×d matrices, d ∈ {2, 3}.

use crate::math::{fabs, sqrt};
use core::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    pub d: usize,
    pub a: [[f64; 3]; 3],
}

const SQRT1_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

impl SymMatrix {
    pub fn zeros(d: usize) -> Self {
        assert!(d == 2 || d == 3, "dimension must be 2 or 3");
        SymMatrix { d, a: [[0.0; 3]; 3] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = 1.0;
        }
        m
    }

    /// Symmetrizes a general matrix: (A + Aᵀ)/2.
    pub fn sym_part(d: usize, g: &[[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i][j] = 0.5 * (g[i][j] + g[j][i]);
            }
        }
        m
    }

    pub fn from_rows2(a11: f64, a12: f64, a22: f64) -> Self {
        let mut m = Self::zeros(2);
        m.a[0][0] = a11;
        m.a[0][1] = a12;
        m.a[1][0] = a12;
        m.a[1][1] = a22;
        m
    }

    /// Number of independent entries, d(d+1)/2.
    pub fn dof(d: usize) -> usize {
        d * (d + 1) / 2
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.a[i][i]).sum()
    }

    /// Traceless part D − tr(D)/d · I.
    pub fn deviatoric(&self) -> Self {
        let mut m = *self;
        let t = self.trace() / self.d as f64;
        for i in 0..self.d {
            m.a[i][i] -= t;
        }
        m
    }

    pub fn ddot(&self, o: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.a[i][j] * o.a[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.ddot(self))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| fabs(self.a[i][j] - self.a[j][i]) <= tol))
    }

    /// Coordinates in the orthonormal basis {e_i⊗e_i} ∪ {(e_i⊗e_j + e_j⊗e_i)/√2}.
    pub fn to_coords(&self, out: &mut [f64]) {
        let mut k = 0;
        for i in 0..self.d {
            out[k] = self.a[i][i];
            k += 1;
        }
        for i in 0..self.d {
            for j in i + 1..self.d {
                out[k] = self.a[i][j] / SQRT1_2;
                k += 1;
            }
        }
    }

    pub fn from_coords(d: usize, c: &[f64]) -> Self {
        let mut m = Self::zeros(d);
        let mut k = 0;
        for i in 0..d {
            m.a[i][i] = c[k];
            k += 1;
        }
        for i in 0..d {
            for j in i + 1..d {
                let v = c[k] * SQRT1_2;
                m.a[i][j] = v;
                m.a[j][i] = v;
                k += 1;
            }
        }
        m
    }

    /// Quadratic form ξᵀ A ξ.
    pub fn quad(&self, xi: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += xi[i] * self.a[i][j] * xi[j];
            }
        }
        s
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(mut self, o: SymMatrix) -> SymMatrix {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] += o.a[i][j];
            }
        }
        self
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, o: SymMatrix) -> SymMatrix {
        self + (-o)
    }
}

impl Neg for SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self * -1.0
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(mut self, s: f64) -> SymMatrix {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] *= s;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_round_trip_and_isometry() {
        let mut m = SymMatrix::zeros(3);
        let vals = [[1.0, 2.0, -0.5], [2.0, 0.3, 4.0], [-0.5, 4.0, -1.0]];
        m.a = vals;
        let mut c = [0.0; 6];
        m.to_coords(&mut c);
        let back = SymMatrix::from_coords(3, &c);
        assert!((back - m).norm() < 1e-14);
        let n2: f64 = c.iter().map(|x| x * x).sum();
        assert!((n2 - m.ddot(&m)).abs() < 1e-12);
    }

    #[test]
    fn deviatoric_is_traceless() {
        let m = SymMatrix::from_rows2(3.0, 1.0, -1.0);
        assert!(m.deviatoric().trace().abs() < 1e-15);
        assert!(SymMatrix::identity(2).deviatoric().norm() < 1e-15);
    }
}
