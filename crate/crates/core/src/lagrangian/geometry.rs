//! Induced metric, second fundamental form and mean curvature form of an
//! immersed torus in `(C*)^n` with a Kähler metric from a potential.

use nalgebra::DMatrix;

use super::chart::Immersion;
use super::forms::{OneForm, TorusMetric};
use crate::error::Result;
use crate::kahler::{metric_jet, FamilyParams, KahlerPotential};

/// Pointwise geometry of an immersed torus.
#[derive(Debug, Clone)]
pub struct GeometrySample {
    pub metric: TorusMetric,
    /// Tangent frames `e_j` as columns of a `2n × n` matrix.
    pub frames: Vec<DMatrix<f64>>,
    /// `a[p][(i*n + j)*n + k] = ω(II(e_i, e_j), e_k)`.
    pub a: Vec<Vec<f64>>,
    /// `α_k = g^{ij} a_ijk`.
    pub alpha: OneForm,
    /// `α_k = ω(H, e_k)` with `H` the normal projection of `tr II`.
    pub alpha_normal: OneForm,
    /// Ambient Ricci tensor restricted to the frames, `Ric(e_i, e_j)`.
    pub ricci: Option<Vec<DMatrix<f64>>>,
    /// `max |ω(e_i, e_j)|`.
    pub lagrangian_defect: f64,
    /// `max |a_ijk − a_ikj|`.
    pub symmetry_defect: f64,
}

impl GeometrySample {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn a_ijk(&self, p: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.a[p][(i * n + j) * n + k]
    }

    pub fn volume(&self) -> f64 {
        self.metric.volume()
    }

    pub fn codifferential_alpha(&self) -> Vec<f64> {
        self.metric.codifferential(&self.alpha)
    }
}

struct PointGeometry {
    g: DMatrix<f64>,
    a: Vec<f64>,
    alpha: Vec<f64>,
    alpha_normal: Vec<f64>,
    ricci: Option<DMatrix<f64>>,
    lag: f64,
    sym: f64,
}

/// Samples the geometry of `imm` under the family member `fp`. With
/// `with_ricci` the ambient Ricci tensor is evaluated along the torus as well.
pub fn second_fundamental(
    p: &KahlerPotential,
    fp: &FamilyParams,
    imm: &Immersion,
    with_ricci: bool,
) -> Result<GeometrySample> {
    let n = imm.dim();
    let d = 2 * n;
    let (frames, second) = imm.derivatives();
    let idx: Vec<usize> = (0..imm.grid.len()).collect();
    let order = if with_ricci { 2 } else { 1 };
    let per_point = crate::par::map_result(&idx, |&q| -> Result<PointGeometry> {
        let pt = &imm.pts[q];
        let mj = metric_jet(p, &pt[..n], &pt[n..], order, fp)?;
        let e = &frames[q];
        let omega = mj.kahler_form();
        let g = e.transpose() * &mj.g * e;
        let g_inv = g.clone().try_inverse().ok_or(crate::Error::DegenerateMetric(g.determinant()))?;
        let lag = (e.transpose() * &omega * e).amax();
        // II_ij = ∂_ij X + Γ(e_i, e_j)
        let mut ii = vec![vec![0.0; d]; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = &mut ii[i * n + j];
                for a in 0..d {
                    let mut s = second[q][i * n + j][a];
                    for b in 0..d {
                        for c in 0..d {
                            s += mj.gamma(a, b, c) * e[(b, i)] * e[(c, j)];
                        }
                    }
                    v[a] = s;
                }
            }
        }
        let omega_e = &omega * e;
        let mut a = vec![0.0; n * n * n];
        for ij in 0..n * n {
            for k in 0..n {
                a[ij * n + k] = (0..d).map(|b| ii[ij][b] * omega_e[(b, k)]).sum();
            }
        }
        let mut sym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    sym = sym.max((a[(i * n + j) * n + k] - a[(i * n + k) * n + j]).abs());
                }
            }
        }
        let alpha: Vec<f64> = (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += g_inv[(i, j)] * a[(i * n + j) * n + k];
                    }
                }
                s
            })
            .collect();
        let mut trace = nalgebra::DVector::zeros(d);
        for i in 0..n {
            for j in 0..n {
                for b in 0..d {
                    trace[b] += g_inv[(i, j)] * ii[i * n + j][b];
                }
            }
        }
        let tang = e * (&g_inv * (e.transpose() * (&mj.g * &trace)));
        let h = trace - tang;
        let alpha_normal: Vec<f64> = (0..n).map(|k| h.dot(&omega_e.column(k))).collect();
        let ricci = mj.ricci.as_ref().map(|r| e.transpose() * r * e);
        Ok(PointGeometry { g, a, alpha, alpha_normal, ricci, lag, sym })
    })?;
    let mut gs = Vec::with_capacity(idx.len());
    let mut a = Vec::with_capacity(idx.len());
    let mut alpha = vec![vec![0.0; idx.len()]; n];
    let mut alpha_normal = vec![vec![0.0; idx.len()]; n];
    let mut ricci = with_ricci.then(Vec::new);
    let (mut lag, mut sym): (f64, f64) = (0.0, 0.0);
    for (q, pg) in per_point.into_iter().enumerate() {
        for k in 0..n {
            alpha[k][q] = pg.alpha[k];
            alpha_normal[k][q] = pg.alpha_normal[k];
        }
        if let (Some(r), Some(v)) = (pg.ricci, ricci.as_mut()) {
            v.push(r);
        }
        lag = lag.max(pg.lag);
        sym = sym.max(pg.sym);
        gs.push(pg.g);
        a.push(pg.a);
    }
    Ok(GeometrySample {
        metric: TorusMetric::new(imm.grid.clone(), gs)?,
        frames,
        a,
        alpha,
        alpha_normal,
        ricci,
        lagrangian_defect: lag,
        symmetry_defect: sym,
    })
}

/// The mean curvature form `α = a_ijk g^{ij} dt_k`.
pub fn mean_curvature_form(sample: &GeometrySample) -> OneForm {
    sample.alpha.clone()
}
