//! First variation of volume and the linearizations of `α` and `d*α` along
//! the Lagrangian deformation whose one-form is `β = ι(V)ω|_L`.
//!
//! With `B = β♯` the deformation is `V = −JB`, and
//! `ġ_ij = −2 a_ijk B^k`, `α̇ = −dd*β + Ric(B, ·)` with `d* = −div`.

use nalgebra::DMatrix;

use super::forms::{form_axpy, OneForm, TorusMetric};
use super::geometry::GeometrySample;

/// `−∫ g(α, β) dV`.
pub fn first_variation(sample: &GeometrySample, beta: &OneForm) -> f64 {
    -sample.metric.l2(&sample.alpha, beta)
}

/// `Ric(B, e_k)` for tangent-restricted Ricci matrices `ric[p]`.
pub fn ricci_contract(metric: &TorusMetric, ric: &[DMatrix<f64>], beta: &OneForm) -> OneForm {
    let n = metric.dim();
    let b = metric.raise(beta);
    (0..n)
        .map(|k| (0..metric.len()).map(|p| (0..n).map(|i| b[i][p] * ric[p][(i, k)]).sum()).collect())
        .collect()
}

/// `α̇ = −dd*β + Ric(B, ·)` for the given restricted Ricci tensor.
pub fn alpha_dot(metric: &TorusMetric, beta: &OneForm, ric: &[DMatrix<f64>]) -> OneForm {
    let mut out = metric.d(&metric.codifferential(beta));
    out.iter_mut().flatten().for_each(|v| *v = -*v);
    form_axpy(&mut out, 1.0, &ricci_contract(metric, ric, beta));
    out
}

/// The four terms of `D_α β = d/dt (d*α)`, each a function on the grid.
#[derive(Debug, Clone)]
pub struct DTerms {
    /// `−d*dd*β`.
    pub bilaplacian: Vec<f64>,
    /// `d*(Ric(B, ·))`.
    pub ricci: Vec<f64>,
    /// `A(g(α, β))` with `A = α♯`.
    pub drift: Vec<f64>,
    /// `−2 div(a^{ijk} α_j β_k)`.
    pub cubic: Vec<f64>,
}

impl DTerms {
    pub fn total(&self) -> Vec<f64> {
        (0..self.bilaplacian.len())
            .map(|p| self.bilaplacian[p] + self.ricci[p] + self.drift[p] + self.cubic[p])
            .collect()
    }
}

/// Term-by-term assembly of `D_α β`. Requires Ricci in the sample.
pub fn d_operator_terms(sample: &GeometrySample, beta: &OneForm) -> DTerms {
    let m = &sample.metric;
    let n = m.dim();
    let len = m.len();
    let ric = sample.ricci.as_ref().expect("geometry sample without Ricci");
    let bilaplacian = m.laplacian(&m.codifferential(beta)).into_iter().map(|v| -v).collect();
    let ricci = m.codifferential(&ricci_contract(m, ric, beta));
    let gab = m.inner(&sample.alpha, beta);
    let dg = m.d(&gab);
    let a_up = m.raise(&sample.alpha);
    let drift = (0..len).map(|p| (0..n).map(|i| a_up[i][p] * dg[i][p]).sum()).collect();
    // W^i = g^{il} a_ljk A^j B^k = δg^{ij} α_j / 2
    let b_up = m.raise(beta);
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..len)
                .map(|p| {
                    let gi = &m.g_inv[p];
                    let mut s = 0.0;
                    for l in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                s += gi[(i, l)] * sample.a_ijk(p, l, j, k) * a_up[j][p] * b_up[k][p];
                            }
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    let cubic = m.divergence(&w).into_iter().map(|v| -2.0 * v).collect();
    DTerms { bilaplacian, ricci, drift, cubic }
}

/// `D_α β`; integrates to zero against `dV` up to round-off.
pub fn d_operator(sample: &GeometrySample, beta: &OneForm) -> Vec<f64> {
    d_operator_terms(sample, beta).total()
}
