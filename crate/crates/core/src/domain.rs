//! Rectangular domain, tensor grid quadrature, boundary data and the sine
//! Galerkin space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, domain, Result};
use crate::math::{cos, fabs, sin, sqrt, PI};
use crate::tensor::SymMatrix;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Dead band for the inflow/outflow classification.
pub const TAU_B: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub mid: Vec2,
    /// Unit normal pointing from `a` to `b`.
    pub normal: Vec2,
    /// Length of the dual-cell interface.
    pub len: f64,
    /// Distance between the two nodes.
    pub dist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub normal: Vec2,
    /// Trapezoid weight along the edge.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub l1: f64,
    pub l2: f64,
    pub m: usize,
    pub hx: f64,
    pub hy: f64,
    pub weights: Vec<f64>,
    pub faces: Vec<Face>,
    pub boundary: Vec<BoundaryNode>,
}

impl Domain {
    pub fn new(l1: f64, l2: f64, m: usize) -> Result<Self> {
        if !(l1 > 0.0) || !(l2 > 0.0) {
            return Err(domain("domain extents must be positive"));
        }
        if m < 4 {
            return Err(config("grid resolution m must be at least 4"));
        }
        let hx = l1 / m as f64;
        let hy = l2 / m as f64;
        let np = m + 1;
        let edge = |i: usize| if i == 0 || i == m { 0.5 } else { 1.0 };
        let mut weights = vec![0.0; np * np];
        for j in 0..np {
            for i in 0..np {
                weights[i + np * j] = hx * hy * edge(i) * edge(j);
            }
        }
        let mut faces = Vec::with_capacity(2 * m * np);
        for j in 0..np {
            for i in 0..m {
                faces.push(Face {
                    a: i + np * j,
                    b: i + 1 + np * j,
                    mid: [(i as f64 + 0.5) * hx, j as f64 * hy],
                    normal: [1.0, 0.0],
                    len: hy * edge(j),
                    dist: hx,
                });
            }
        }
        for j in 0..m {
            for i in 0..np {
                faces.push(Face {
                    a: i + np * j,
                    b: i + np * (j + 1),
                    mid: [i as f64 * hx, (j as f64 + 0.5) * hy],
                    normal: [0.0, 1.0],
                    len: hx * edge(i),
                    dist: hy,
                });
            }
        }
        let mut boundary = Vec::with_capacity(4 * np);
        for j in 0..np {
            boundary.push(BoundaryNode { node: np * j, normal: [-1.0, 0.0], weight: hy * edge(j) });
            boundary.push(BoundaryNode { node: m + np * j, normal: [1.0, 0.0], weight: hy * edge(j) });
        }
        for i in 0..np {
            boundary.push(BoundaryNode { node: i, normal: [0.0, -1.0], weight: hx * edge(i) });
            boundary.push(BoundaryNode { node: i + np * m, normal: [0.0, 1.0], weight: hx * edge(i) });
        }
        Ok(Domain { l1, l2, m, hx, hy, weights, faces, boundary })
    }

    pub fn node_count(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + (self.m + 1) * j
    }

    pub fn coords(&self, k: usize) -> Vec2 {
        let np = self.m + 1;
        [(k % np) as f64 * self.hx, (k / np) as f64 * self.hy]
    }

    pub fn is_boundary_node(&self, k: usize) -> bool {
        let np = self.m + 1;
        let (i, j) = (k % np, k / np);
        i == 0 || j == 0 || i == self.m || j == self.m
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }

    /// Trapezoid quadrature of nodal values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Σ_f (|f|/h) (a_j − a_i)(b_j − b_i): the discrete Dirichlet form.
    pub fn dirichlet(&self, a: &[f64], b: &[f64]) -> f64 {
        self.faces
            .iter()
            .map(|f| f.len / f.dist * (a[f.b] - a[f.a]) * (b[f.b] - b[f.a]))
            .sum()
    }

    /// Nodal values of a closure.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let [x, y] = self.coords(k);
                f(x, y)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Inflow,
    Outflow,
    Wall,
}

/// Time-independent boundary velocity u_B and inflow density ρ_B sampled on
/// the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub ub_nodes: Vec<Vec2>,
    pub grad_ub_nodes: Vec<Mat2>,
    /// u_B·n at each face midpoint.
    pub ub_faces: Vec<f64>,
    /// u_B·n per boundary entry, zeroed inside the dead band.
    pub ubn: Vec<f64>,
    pub class: Vec<BoundaryClass>,
    /// ρ_B per boundary entry.
    pub rho_b: Vec<f64>,
}

impl BoundaryData {
    pub fn sample<U, R>(dom: &Domain, ub: U, rho_b: R) -> Result<Self>
    where
        U: Fn(f64, f64) -> Vec2,
        R: Fn(f64, f64) -> f64,
    {
        let n = dom.node_count();
        let mut ub_nodes = Vec::with_capacity(n);
        let mut grad_ub_nodes = Vec::with_capacity(n);
        let h = 1e-5 * dom.l1.max(dom.l2);
        let grad_at = |x: f64, y: f64, h: f64| -> Mat2 {
            let ex = (ub(x + h, y), ub(x - h, y));
            let ey = (ub(x, y + h), ub(x, y - h));
            [
                [(ex.0[0] - ex.1[0]) / (2.0 * h), (ey.0[0] - ey.1[0]) / (2.0 * h)],
                [(ex.0[1] - ex.1[1]) / (2.0 * h), (ey.0[1] - ey.1[1]) / (2.0 * h)],
            ]
        };
        let mut worst_smooth: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for k in 0..n {
            let [x, y] = dom.coords(k);
            let v = ub(x, y);
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(domain(format!("u_B not finite at ({x}, {y})")));
            }
            ub_nodes.push(v);
            let g = grad_at(x, y, h);
            let g2 = grad_at(x, y, 4.0 * h);
            for r in 0..2 {
                for c in 0..2 {
                    worst_smooth = worst_smooth.max(fabs(g[r][c] - g2[r][c]));
                    scale = scale.max(fabs(g[r][c]));
                }
            }
            grad_ub_nodes.push(g);
        }
        if !(worst_smooth <= 1e-3 * scale) {
            return Err(domain("u_B is not continuously differentiable on the grid"));
        }
        let ub_faces = dom
            .faces
            .iter()
            .map(|f| {
                let v = ub(f.mid[0], f.mid[1]);
                v[0] * f.normal[0] + v[1] * f.normal[1]
            })
            .collect();
        let mut ubn = Vec::with_capacity(dom.boundary.len());
        let mut class = Vec::with_capacity(dom.boundary.len());
        let mut rb = Vec::with_capacity(dom.boundary.len());
        for b in &dom.boundary {
            let v = ub_nodes[b.node];
            let s = v[0] * b.normal[0] + v[1] * b.normal[1];
            let [x, y] = dom.coords(b.node);
            let (c, s) = if fabs(s) <= TAU_B {
                (BoundaryClass::Wall, 0.0)
            } else if s < 0.0 {
                (BoundaryClass::Inflow, s)
            } else {
                (BoundaryClass::Outflow, s)
            };
            let r = rho_b(x, y);
            if c == BoundaryClass::Inflow && !(r > 0.0) {
                return Err(domain(format!("rho_B must be positive on inflow, got {r} at ({x}, {y})")));
            }
            class.push(c);
            ubn.push(s);
            rb.push(r);
        }
        Ok(BoundaryData { ub_nodes, grad_ub_nodes, ub_faces, ubn, class, rho_b: rb })
    }

    /// u_B ≡ 0 with ρ_B ≡ 1.
    pub fn at_rest(dom: &Domain) -> Self {
        Self::sample(dom, |_, _| [0.0, 0.0], |_, _| 1.0).expect("zero data is valid")
    }

    pub fn is_closed(&self) -> bool {
        self.ubn.iter().all(|&v| v == 0.0)
    }

    pub fn max_ub(&self) -> f64 {
        self.ub_nodes
            .iter()
            .map(|v| sqrt(v[0] * v[0] + v[1] * v[1]))
            .fold(0.0, f64::max)
    }

    /// Minimum of ρ_B over the inflow part (∞ when there is none).
    pub fn min_rho_b_inflow(&self) -> f64 {
        self.rho_b
            .iter()
            .zip(&self.class)
            .filter(|(_, c)| **c == BoundaryClass::Inflow)
            .map(|(r, _)| *r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho_b_inflow(&self) -> f64 {
        self.rho_b
            .iter()
            .zip(&self.class)
            .filter(|(_, c)| **c == BoundaryClass::Inflow)
            .map(|(r, _)| *r)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub k1: usize,
    pub k2: usize,
    pub comp: usize,
}

/// Orthonormal sine modes w = c sin(k1 π x/L1) sin(k2 π y/L2) e_comp.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinBasis {
    pub modes: Vec<Mode>,
    /// Scalar amplitude at each node (boundary nodes exactly 0).
    pub node_vals: Vec<Vec<f64>>,
    /// Gradient of the scalar amplitude at each node.
    pub node_grads: Vec<Vec<Vec2>>,
    /// w·n at face midpoints.
    pub face_vals: Vec<Vec<f64>>,
    l1: f64,
    l2: f64,
}

impl GalerkinBasis {
    pub fn available_modes(m: usize) -> usize {
        2 * (m - 1) * (m - 1)
    }

    /// First `n` modes ordered by total mode number, then component, then k1.
    pub fn mode_list(m: usize, n: usize) -> Result<Vec<Mode>> {
        if n == 0 {
            return Err(config("Galerkin dimension must be at least 1"));
        }
        if n > Self::available_modes(m) {
            return Err(config(format!(
                "n = {n} exceeds the {} sine modes resolvable at m = {m}",
                Self::available_modes(m)
            )));
        }
        let mut all = Vec::new();
        for k1 in 1..m {
            for k2 in 1..m {
                for comp in 0..2 {
                    all.push(Mode { k1, k2, comp });
                }
            }
        }
        all.sort_by_key(|md| (md.k1 + md.k2, md.comp, md.k1));
        all.truncate(n);
        Ok(all)
    }

    pub fn build(dom: &Domain, n: usize) -> Result<Self> {
        let modes = Self::mode_list(dom.m, n)?;
        let norm = 2.0 / sqrt(dom.l1 * dom.l2);
        let mut node_vals = Vec::with_capacity(n);
        let mut node_grads = Vec::with_capacity(n);
        let mut face_vals = Vec::with_capacity(n);
        for md in &modes {
            let kx = md.k1 as f64 * PI / dom.l1;
            let ky = md.k2 as f64 * PI / dom.l2;
            let mut v = vec![0.0; dom.node_count()];
            let mut g = vec![[0.0; 2]; dom.node_count()];
            for k in 0..dom.node_count() {
                let [x, y] = dom.coords(k);
                if !dom.is_boundary_node(k) {
                    v[k] = norm * sin(kx * x) * sin(ky * y);
                }
                g[k] = [
                    norm * kx * cos(kx * x) * sin(ky * y),
                    norm * ky * sin(kx * x) * cos(ky * y),
                ];
            }
            let fv = dom
                .faces
                .iter()
                .map(|f| {
                    if f.normal[md.comp] == 0.0 {
                        0.0
                    } else {
                        f.normal[md.comp] * norm * sin(kx * f.mid[0]) * sin(ky * f.mid[1])
                    }
                })
                .collect();
            node_vals.push(v);
            node_grads.push(g);
            face_vals.push(fv);
        }
        Ok(GalerkinBasis { modes, node_vals, node_grads, face_vals, l1: dom.l1, l2: dom.l2 })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Pointwise value of mode i.
    pub fn eval(&self, i: usize, x: f64, y: f64) -> Vec2 {
        let md = self.modes[i];
        let norm = 2.0 / sqrt(self.l1 * self.l2);
        let s = norm * sin(md.k1 as f64 * PI * x / self.l1) * sin(md.k2 as f64 * PI * y / self.l2);
        let mut out = [0.0; 2];
        out[md.comp] = s;
        out
    }

    /// Gram matrix by the grid quadrature.
    pub fn gram(&self, dom: &Domain) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if self.modes[i].comp != self.modes[j].comp {
                    continue;
                }
                g[i * n + j] = (0..dom.node_count())
                    .map(|k| dom.weights[k] * self.node_vals[i][k] * self.node_vals[j][k])
                    .sum();
            }
        }
        g
    }

    /// Coefficients of the discrete L² projection of a nodal vector field.
    pub fn project(&self, dom: &Domain, field: &[Vec2]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let c = self.modes[i].comp;
                (0..dom.node_count())
                    .map(|k| dom.weights[k] * field[k][c] * self.node_vals[i][k])
                    .sum()
            })
            .collect()
    }
}

/// Grid, Galerkin space and boundary data bundled for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub domain: Domain,
    pub basis: GalerkinBasis,
    pub bc: BoundaryData,
}

impl Space {
    pub fn new(domain: Domain, n: usize, bc: BoundaryData) -> Result<Self> {
        let basis = GalerkinBasis::build(&domain, n)?;
        Ok(Space { domain, basis, bc })
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Nodal values of v = Σ c_i w_i.
    pub fn v_nodes(&self, c: &[f64]) -> Vec<Vec2> {
        let mut out = vec![[0.0; 2]; self.domain.node_count()];
        for (i, ci) in c.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            let comp = self.basis.modes[i].comp;
            for (o, w) in out.iter_mut().zip(&self.basis.node_vals[i]) {
                o[comp] += ci * w;
            }
        }
        out
    }

    /// Nodal values of u = u_B + v.
    pub fn u_nodes(&self, c: &[f64]) -> Vec<Vec2> {
        let mut u = self.v_nodes(c);
        for (o, b) in u.iter_mut().zip(&self.bc.ub_nodes) {
            o[0] += b[0];
            o[1] += b[1];
        }
        u
    }

    /// u·n at face midpoints.
    pub fn face_flux(&self, c: &[f64]) -> Vec<f64> {
        let mut out = self.bc.ub_faces.clone();
        for (i, ci) in c.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(&self.basis.face_vals[i]) {
                *o += ci * w;
            }
        }
        out
    }

    /// Nodal ∇v with entries [component][direction].
    pub fn grad_v_nodes(&self, c: &[f64]) -> Vec<Mat2> {
        let mut out = vec![[[0.0; 2]; 2]; self.domain.node_count()];
        for (i, ci) in c.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            let comp = self.basis.modes[i].comp;
            for (o, g) in out.iter_mut().zip(&self.basis.node_grads[i]) {
                o[comp][0] += ci * g[0];
                o[comp][1] += ci * g[1];
            }
        }
        out
    }

    /// Nodal ∇u = ∇u_B + ∇v.
    pub fn grad_u_nodes(&self, c: &[f64]) -> Vec<Mat2> {
        let mut g = self.grad_v_nodes(c);
        for (o, b) in g.iter_mut().zip(&self.bc.grad_ub_nodes) {
            for r in 0..2 {
                for s in 0..2 {
                    o[r][s] += b[r][s];
                }
            }
        }
        g
    }

    /// Divergence per node: max of the pointwise gradient trace and the
    /// finite-volume flux balance of the dual cell.
    pub fn div_inf(&self, c: &[f64]) -> f64 {
        let g = self.grad_u_nodes(c);
        let pointwise = g.iter().map(|m| fabs(m[0][0] + m[1][1])).fold(0.0, f64::max);
        let flux = self.face_flux(c);
        let mut bal = vec![0.0; self.domain.node_count()];
        for (f, u) in self.domain.faces.iter().zip(&flux) {
            bal[f.a] += u * f.len;
            bal[f.b] -= u * f.len;
        }
        for (b, un) in self.domain.boundary.iter().zip(&self.bc.ubn) {
            bal[b.node] += un * b.weight;
        }
        let fv = bal
            .iter()
            .zip(&self.domain.weights)
            .map(|(b, w)| fabs(b / w))
            .fold(0.0, f64::max);
        pointwise.max(fv)
    }
}

/// Symmetric part of a 2×2 gradient as a `SymMatrix`.
pub fn sym2(g: &Mat2) -> SymMatrix {
    SymMatrix::from_rows2(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
}

/// S:G for a symmetric S and a general 2×2 G.
pub fn contract2(s: &SymMatrix, g: &Mat2) -> f64 {
    s.a[0][0] * g[0][0] + s.a[0][1] * (g[0][1] + g[1][0]) + s.a[1][1] * g[1][1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_area() {
        let d = Domain::new(2.0, 3.0, 8).unwrap();
        assert!((d.weights.iter().sum::<f64>() - 6.0).abs() < 1e-13);
        let perimeter: f64 = d.boundary.iter().map(|b| b.weight).sum();
        assert!((perimeter - 10.0).abs() < 1e-13);
    }

    #[test]
    fn single_mode_on_pi_square() {
        let d = Domain::new(PI, PI, 16).unwrap();
        let b = GalerkinBasis::build(&d, 1).unwrap();
        assert_eq!(b.modes[0], Mode { k1: 1, k2: 1, comp: 0 });
        let g = b.gram(&d);
        assert!((g[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_many_modes_is_config_error() {
        let d = Domain::new(1.0, 1.0, 4).unwrap();
        assert!(GalerkinBasis::build(&d, 18).is_ok());
        assert!(matches!(
            GalerkinBasis::build(&d, 19),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn channel_classification() {
        let d = Domain::new(1.0, 1.0, 8).unwrap();
        let bc = BoundaryData::sample(&d, |_, _| [1.0, 0.0], |_, _| 1.0).unwrap();
        for (b, c) in d.boundary.iter().zip(&bc.class) {
            let expect = if b.normal == [-1.0, 0.0] {
                BoundaryClass::Inflow
            } else if b.normal == [1.0, 0.0] {
                BoundaryClass::Outflow
            } else {
                BoundaryClass::Wall
            };
            assert_eq!(*c, expect);
        }
        let rest = BoundaryData::at_rest(&d);
        assert!(rest.class.iter().all(|c| *c == BoundaryClass::Wall));
    }
}
