//! L²-orthogonal splitting `α = dφ + harmonic + coexact` on a torus with
//! a Riemannian metric, and the resulting classification of `L`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::forms::{constant_form, form_axpy, form_sub, form_sup, sup, zero_form, OneForm, TorusMetric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Minimal,
    LMinimal,
    HMinimal,
    None,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Minimal => "minimal",
            Classification::LMinimal => "L-minimal",
            Classification::HMinimal => "H-minimal",
            Classification::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HodgeTolerances {
    /// `sup |α|_g` below which L is minimal.
    pub minimal: f64,
    /// Threshold for `‖d*α‖∞` and for the harmonic and exact parts.
    pub harmonic: f64,
}

impl Default for HodgeTolerances {
    fn default() -> Self {
        HodgeTolerances { minimal: 1e-6, harmonic: 1e-8 }
    }
}

/// Harmonic representatives `h_j = dt_j + dψ_j` with `d*h_j = 0`.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub forms: Vec<OneForm>,
    pub gram: DMatrix<f64>,
}

pub fn harmonic_basis(metric: &TorusMetric) -> Result<HarmonicBasis> {
    let n = metric.dim();
    let len = metric.len();
    let mut forms = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        let e = constant_form(&c, len);
        let rhs: Vec<f64> = metric.codifferential(&e).into_iter().map(|v| -v).collect();
        let psi = metric.solve_poisson(&rhs)?;
        let mut h = e;
        form_axpy(&mut h, 1.0, &metric.d(&psi));
        forms.push(h);
    }
    let gram = DMatrix::from_fn(n, n, |i, j| metric.l2(&forms[i], &forms[j]));
    Ok(HarmonicBasis { forms, gram })
}

#[derive(Debug, Clone)]
pub struct HodgeSplit {
    /// Cohomology class of `α` as coefficients of `dt_j`.
    pub class: Vec<f64>,
    pub exact_potential: Vec<f64>,
    pub exact: OneForm,
    pub harmonic: OneForm,
    pub coexact: OneForm,
    pub classification: Classification,
    pub sup_alpha: f64,
    pub sup_codifferential: f64,
    pub reconstruction_error: f64,
    /// Largest normalized L² pairing between distinct parts.
    pub orthogonality: f64,
}

impl HodgeSplit {
    pub fn exact_norm(&self, metric: &TorusMetric) -> f64 {
        metric.l2(&self.exact, &self.exact).max(0.0).sqrt()
    }

    pub fn harmonic_norm(&self, metric: &TorusMetric) -> f64 {
        metric.l2(&self.harmonic, &self.harmonic).max(0.0).sqrt()
    }
}

pub fn hodge_decompose(alpha: &OneForm, metric: &TorusMetric, tol: HodgeTolerances) -> Result<HodgeSplit> {
    let n = metric.dim();
    let len = metric.len();
    let dstar = metric.codifferential(alpha);
    let phi = metric.solve_poisson(&dstar)?;
    let exact = metric.d(&phi);
    let rest = form_sub(alpha, &exact);
    let basis = harmonic_basis(metric)?;
    let b = DVector::from_iterator(n, basis.forms.iter().map(|h| metric.l2(&rest, h)));
    let coef = basis
        .gram
        .clone()
        .cholesky()
        .ok_or(Error::PoissonNoConvergence(f64::NAN))?
        .solve(&b);
    let mut harmonic = zero_form(n, len);
    for (c, h) in coef.iter().zip(&basis.forms) {
        form_axpy(&mut harmonic, *c, h);
    }
    let coexact = form_sub(&rest, &harmonic);
    let mut recon = exact.clone();
    form_axpy(&mut recon, 1.0, &harmonic);
    form_axpy(&mut recon, 1.0, &coexact);
    let reconstruction_error = form_sup(&form_sub(&recon, alpha));
    let parts = [&exact, &harmonic, &coexact];
    let norms: Vec<f64> = parts.iter().map(|p| metric.l2(p, p).max(0.0).sqrt()).collect();
    let scale = metric.l2(alpha, alpha).max(0.0).sqrt().max(1e-300);
    let mut orthogonality: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            if norms[i] > 0.0 && norms[j] > 0.0 {
                orthogonality = orthogonality.max(metric.l2(parts[i], parts[j]).abs() / (scale * scale));
            }
        }
    }
    let sup_alpha = sup(&metric.norm_pointwise(alpha));
    let sup_codifferential = sup(&dstar);
    let vol = metric.volume().sqrt();
    let classification = if sup_alpha < tol.minimal {
        Classification::Minimal
    } else if norms[0] / vol < tol.harmonic && norms[1] / vol < tol.harmonic {
        Classification::LMinimal
    } else if sup_codifferential < tol.harmonic {
        Classification::HMinimal
    } else {
        Classification::None
    };
    Ok(HodgeSplit {
        class: coef.iter().copied().collect(),
        exact_potential: phi,
        exact,
        harmonic,
        coexact,
        classification,
        sup_alpha,
        sup_codifferential,
        reconstruction_error,
        orthogonality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;
    use approx::assert_relative_eq;

    fn bumpy_metric(grid: &TorusGrid) -> TorusMetric {
        let g = grid
            .points()
            .iter()
            .map(|t| {
                let a = 1.5 + 0.3 * t[0].cos();
                let b = 1.0 + 0.2 * (t[0] - t[1]).sin();
                let c = 0.15 * t[1].cos();
                DMatrix::from_row_slice(2, 2, &[a, c, c, b])
            })
            .collect();
        TorusMetric::new(grid.clone(), g).unwrap()
    }

    #[test]
    fn zero_form_is_minimal() {
        let grid = TorusGrid::new(2, 4);
        let m = bumpy_metric(&grid);
        let s = hodge_decompose(&zero_form(2, grid.len()), &m, HodgeTolerances::default()).unwrap();
        assert_eq!(s.classification, Classification::Minimal);
    }

    #[test]
    fn constant_form_on_flat_torus_is_h_minimal_with_its_class() {
        let grid = TorusGrid::new(2, 4);
        let m = TorusMetric::constant(grid.clone(), DMatrix::identity(2, 2) * 2.0).unwrap();
        let a = constant_form(&[-1.0, -1.0], grid.len());
        let s = hodge_decompose(&a, &m, HodgeTolerances::default()).unwrap();
        assert_eq!(s.classification, Classification::HMinimal);
        assert_relative_eq!(s.class[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(s.class[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn coexact_datum_is_l_minimal() {
        let grid = TorusGrid::new(2, 6);
        let m = TorusMetric::constant(grid.clone(), DMatrix::identity(2, 2)).unwrap();
        // d*(ψ dt₁∧dt₂) = (∂₂ψ, −∂₁ψ) on the unit flat torus
        let psi = grid.sample(|t| (t[0] + 2.0 * t[1]).cos() + 0.5 * t[0].sin());
        let a = vec![grid.derivative(&psi, 1), grid.derivative(&psi, 0).iter().map(|v| -v).collect()];
        let s = hodge_decompose(&a, &m, HodgeTolerances::default()).unwrap();
        assert_eq!(s.classification, Classification::LMinimal);
    }

    #[test]
    fn mixed_form_reconstructs_orthogonally() {
        let grid = TorusGrid::new(2, 8);
        let m = bumpy_metric(&grid);
        let f = grid.sample(|t| (t[0] - t[1]).sin());
        let psi = grid.sample(|t| (2.0 * t[1]).cos());
        let mut a = m.d(&f);
        form_axpy(&mut a, 1.0, &vec![grid.derivative(&psi, 1), grid.derivative(&psi, 0)]);
        form_axpy(&mut a, 1.0, &constant_form(&[0.3, -0.2], grid.len()));
        let s = hodge_decompose(&a, &m, HodgeTolerances::default()).unwrap();
        assert!(s.reconstruction_error < 1e-10);
        assert!(s.orthogonality < 1e-8, "{}", s.orthogonality);
        assert_eq!(s.classification, Classification::None);
    }
}
