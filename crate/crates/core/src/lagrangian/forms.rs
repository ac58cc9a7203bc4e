//! Functions and one-forms on a torus `T^n` carrying a Riemannian metric,
//! sampled on a [`TorusGrid`].

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linsolve::{gmres, GmresOptions};
use crate::spectral::TorusGrid;

/// One-form components `[j][point]` in the coordinates `t_j`.
pub type OneForm = Vec<Vec<f64>>;

pub fn zero_form(n: usize, len: usize) -> OneForm {
    vec![vec![0.0; len]; n]
}

/// The constant form `Σ c_j dt_j`.
pub fn constant_form(c: &[f64], len: usize) -> OneForm {
    c.iter().map(|&v| vec![v; len]).collect()
}

pub fn form_axpy(y: &mut OneForm, a: f64, x: &OneForm) {
    for (yj, xj) in y.iter_mut().zip(x) {
        yj.iter_mut().zip(xj).for_each(|(u, v)| *u += a * v);
    }
}

pub fn form_sub(a: &OneForm, b: &OneForm) -> OneForm {
    a.iter().zip(b).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p - q).collect()).collect()
}

pub fn form_sup(a: &OneForm) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// A metric `g_ij(t)` on the torus with its inverse and volume density.
#[derive(Debug, Clone)]
pub struct TorusMetric {
    pub grid: TorusGrid,
    pub g: Vec<DMatrix<f64>>,
    pub g_inv: Vec<DMatrix<f64>>,
    pub sqrt_det: Vec<f64>,
}

impl TorusMetric {
    pub fn new(grid: TorusGrid, g: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut g_inv = Vec::with_capacity(g.len());
        let mut sqrt_det = Vec::with_capacity(g.len());
        for gi in &g {
            let det = gi.determinant();
            if !(det > 0.0) {
                return Err(Error::DegenerateMetric(det));
            }
            g_inv.push(gi.clone().try_inverse().ok_or(Error::DegenerateMetric(det))?);
            sqrt_det.push(det.sqrt());
        }
        Ok(TorusMetric { grid, g, g_inv, sqrt_det })
    }

    /// The constant metric `g0` everywhere.
    pub fn constant(grid: TorusGrid, g0: DMatrix<f64>) -> Result<Self> {
        let g = vec![g0; grid.len()];
        Self::new(grid, g)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.sqrt_det.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫ f dV`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.sqrt_det).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    /// `g^{ij} a_i b_j` at every point.
    pub fn inner(&self, a: &OneForm, b: &OneForm) -> Vec<f64> {
        let n = self.dim();
        (0..self.len())
            .map(|p| {
                let gi = &self.g_inv[p];
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gi[(i, j)] * a[i][p] * b[j][p];
                    }
                }
                s
            })
            .collect()
    }

    /// L² pairing `∫ g(a, b) dV`.
    pub fn l2(&self, a: &OneForm, b: &OneForm) -> f64 {
        self.integrate(&self.inner(a, b))
    }

    pub fn norm_pointwise(&self, a: &OneForm) -> Vec<f64> {
        self.inner(a, a).into_iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// Vector field `g^{ij} a_j`.
    pub fn raise(&self, a: &OneForm) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..self.len()).map(|p| (0..n).map(|j| self.g_inv[p][(i, j)] * a[j][p]).sum()).collect())
            .collect()
    }

    pub fn lower(&self, v: &[Vec<f64>]) -> OneForm {
        let n = self.dim();
        (0..n)
            .map(|i| (0..self.len()).map(|p| (0..n).map(|j| self.g[p][(i, j)] * v[j][p]).sum()).collect())
            .collect()
    }

    pub fn d(&self, f: &[f64]) -> OneForm {
        self.grid.gradient(f)
    }

    /// `(dα)_{ij} = ∂_i α_j − ∂_j α_i` for `i < j`, in lexicographic pair order.
    pub fn d_one_form(&self, a: &OneForm) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let di = self.grid.derivative(&a[j], i);
                let dj = self.grid.derivative(&a[i], j);
                out.push(di.iter().zip(&dj).map(|(u, v)| u - v).collect());
            }
        }
        out
    }

    /// `div V = (1/√g) ∂_i(√g V^i)`.
    pub fn divergence(&self, v: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![0.0; self.len()];
        for (i, vi) in v.iter().enumerate() {
            let flux: Vec<f64> = vi.iter().zip(&self.sqrt_det).map(|(a, b)| a * b).collect();
            let d = self.grid.derivative(&flux, i);
            acc.iter_mut().zip(d).for_each(|(s, x)| *s += x);
        }
        acc.iter_mut().zip(&self.sqrt_det).for_each(|(s, w)| *s /= w);
        acc
    }

    /// `d*α = −div(α♯)`; its integral against `dV` vanishes identically.
    pub fn codifferential(&self, a: &OneForm) -> Vec<f64> {
        self.divergence(&self.raise(a)).into_iter().map(|v| -v).collect()
    }

    /// `d*d f`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.codifferential(&self.d(f))
    }

    /// Average of `√g g^{ij}` used by the constant-coefficient preconditioners.
    pub fn mean_flux_metric(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (gi, w) in self.g_inv.iter().zip(&self.sqrt_det) {
            m += gi * *w;
        }
        m / self.len() as f64
    }

    /// Solves `d*dφ = rhs` for `φ` with zero uniform mean. The right-hand side
    /// is projected onto `∫ rhs dV = 0` first.
    pub fn solve_poisson(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let mut b: Vec<f64> = rhs.iter().zip(&self.sqrt_det).map(|(a, w)| a * w).collect();
        grid.remove_mean(&mut b);
        let a_bar = self.mean_flux_metric();
        let n = self.dim();
        let pre = |v: &[f64]| {
            grid.apply_symbol(v, |k| {
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += a_bar[(i, j)] * (k[i] * k[j]) as f64;
                    }
                }
                if q == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(1.0 / q, 0.0)
                }
            })
        };
        let mut apply = |v: &[f64]| {
            let mut out: Vec<f64> =
                self.laplacian(v).iter().zip(&self.sqrt_det).map(|(a, w)| a * w).collect();
            grid.remove_mean(&mut out);
            out
        };
        let opts = GmresOptions { rel_tol: 1e-13, restart: 80, max_iter: 400 };
        match gmres(&mut apply, &pre, &b, opts) {
            Ok(out) if out.rel_residual < 1e-9 => {
                let mut x = out.x;
                grid.remove_mean(&mut x);
                Ok(x)
            }
            Ok(out) => Err(Error::PoissonNoConvergence(out.rel_residual)),
            Err(Error::LinearSolveStagnation(r)) => Err(Error::PoissonNoConvergence(r)),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn codifferential_of_exact_form_on_unit_flat_torus() {
        let grid = TorusGrid::new(2, 8);
        let m = TorusMetric::constant(grid.clone(), DMatrix::identity(2, 2)).unwrap();
        for k in 1..4 {
            let f = grid.sample(|t| (k as f64 * t[0]).cos());
            let dd = m.laplacian(&f);
            for (a, b) in dd.iter().zip(&f) {
                assert_relative_eq!(*a, (k * k) as f64 * b, epsilon = 1e-11);
            }
        }
        let c = constant_form(&[0.3, -1.0], grid.len());
        assert!(sup(&m.codifferential(&c)) < 1e-14);
    }

    #[test]
    fn codifferential_integrates_to_zero_and_poisson_inverts() {
        let grid = TorusGrid::new(2, 6);
        let g: Vec<DMatrix<f64>> = grid
            .points()
            .iter()
            .map(|t| {
                let a = 1.0 + 0.3 * t[0].sin() * t[1].cos();
                let b = 2.0 + 0.2 * (t[0] + t[1]).cos();
                let c = 0.1 * (2.0 * t[1]).sin();
                DMatrix::from_row_slice(2, 2, &[a, c, c, b])
            })
            .collect();
        let m = TorusMetric::new(grid.clone(), g).unwrap();
        let alpha: OneForm = vec![
            grid.sample(|t| 0.4 + (t[0] - 2.0 * t[1]).cos()),
            grid.sample(|t| (3.0 * t[0]).sin() * t[1].cos()),
        ];
        let dstar = m.codifferential(&alpha);
        assert!(m.integrate(&dstar).abs() < 1e-12);
        let phi = m.solve_poisson(&dstar).unwrap();
        let back = m.laplacian(&phi);
        for (a, b) in back.iter().zip(&dstar) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
