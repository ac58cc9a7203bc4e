//! Centered finite differences along graph deformations `h + εδh`.
//!
//! The graph parametrization moves points along `δX`, which has a tangential
//! part `T` besides the normal one generated by `β = dδh`. Fixed-parameter
//! derivatives therefore pick up Lie derivatives along `T`:
//! `∂_ε(d*α) = D_α β + T(d*α)` and `∂_ε α = α̇ + L_T α`.

use rand::Rng;

use super::OracleReport;
use crate::error::{Error, Result};
use crate::kahler::metric_jet;
use crate::lagrangian::forms::{sup, OneForm};
use crate::lagrangian::variation::{alpha_dot, d_operator, first_variation};
use crate::solver::FiberProblem;
use crate::spectral::TorusGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Volume,
    Alpha,
    Codifferential,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Volume => "volume",
            Quantity::Alpha => "alpha",
            Quantity::Codifferential => "codifferential",
        }
    }
}

const VELOCITY_STEP: f64 = 1e-6;

fn shifted(h: &[f64], dh: &[f64], eps: f64) -> Vec<f64> {
    h.iter().zip(dh).map(|(a, b)| a + eps * b).collect()
}

fn evaluate(prob: &FiberProblem, q: Quantity, h: &[f64], s: f64) -> Result<Vec<f64>> {
    let g = prob.geometry(h, s, false)?;
    Ok(match q {
        Quantity::Volume => vec![g.volume()],
        Quantity::Alpha => g.alpha.concat(),
        Quantity::Codifferential => g.codifferential_alpha(),
    })
}

/// Tangential part `T^i = g^{ij} G(δX, e_j)` of the deformation velocity.
fn tangential_velocity(prob: &FiberProblem, h: &[f64], dh: &[f64], s: f64) -> Result<Vec<Vec<f64>>> {
    let n = prob.dim();
    let plus = prob.immersion(&shifted(h, dh, VELOCITY_STEP), s)?;
    let minus = prob.immersion(&shifted(h, dh, -VELOCITY_STEP), s)?;
    let base = prob.immersion(h, s)?;
    let (frames, _) = base.derivatives();
    let fp = prob.family.at(s);
    let mut t = vec![vec![0.0; base.pts.len()]; n];
    for (p, pt) in base.pts.iter().enumerate() {
        let mj = metric_jet(&prob.potential, &pt[..n], &pt[n..], 0, &fp)?;
        let dx = nalgebra::DVector::from_iterator(2 * n, (0..2 * n).map(|a| (plus.pts[p][a] - minus.pts[p][a]) / (2.0 * VELOCITY_STEP)));
        let e = &frames[p];
        let g = e.transpose() * &mj.g * e;
        let rhs = e.transpose() * (&mj.g * dx);
        let ti = g.lu().solve(&rhs).ok_or(Error::DegenerateMetric(0.0))?;
        for i in 0..n {
            t[i][p] = ti[i];
        }
    }
    Ok(t)
}

fn directional(grid: &TorusGrid, t: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    let df = grid.gradient(f);
    (0..f.len()).map(|p| (0..t.len()).map(|i| t[i][p] * df[i][p]).sum()).collect()
}

/// `(L_T α)_k = T^i ∂_i α_k + α_i ∂_k T^i`.
fn lie_derivative(grid: &TorusGrid, t: &[Vec<f64>], alpha: &OneForm) -> OneForm {
    let n = alpha.len();
    let dt: Vec<Vec<Vec<f64>>> = t.iter().map(|ti| grid.gradient(ti)).collect();
    (0..n)
        .map(|k| {
            let mut out = directional(grid, t, &alpha[k]);
            for (p, o) in out.iter_mut().enumerate() {
                *o += (0..n).map(|i| alpha[i][p] * dt[i][k][p]).sum::<f64>();
            }
            out
        })
        .collect()
}

/// Library value of `∂_ε Q(h + εδh)` at `ε = 0`, including the tangential terms.
fn library(prob: &FiberProblem, q: Quantity, h: &[f64], dh: &[f64], s: f64) -> Result<Vec<f64>> {
    let sample = prob.geometry(h, s, q != Quantity::Volume)?;
    let beta = prob.grid.gradient(dh);
    Ok(match q {
        Quantity::Volume => vec![first_variation(&sample, &beta)],
        Quantity::Alpha => {
            let ric = sample.ricci.as_ref().expect("requested with Ricci");
            let mut a = alpha_dot(&sample.metric, &beta, ric);
            let t = tangential_velocity(prob, h, dh, s)?;
            let lt = lie_derivative(&prob.grid, &t, &sample.alpha);
            for (ak, lk) in a.iter_mut().zip(&lt) {
                for (v, w) in ak.iter_mut().zip(lk) {
                    *v += w;
                }
            }
            a.concat()
        }
        Quantity::Codifferential => {
            let mut d = d_operator(&sample, &beta);
            let t = tangential_velocity(prob, h, dh, s)?;
            let drift = directional(&prob.grid, &t, &sample.codifferential_alpha());
            for (v, w) in d.iter_mut().zip(drift) {
                *v += w;
            }
            d
        }
    })
}

/// Compares centered differences of `Q` at each step of the decreasing
/// schedule against the variation formulas. With two or more steps the
/// convergence order is estimated from the last two errors, and a step whose
/// error sits at the round-off floor is reported as `StepTooSmall`.
pub fn fd_deform(prob: &FiberProblem, q: Quantity, h: &[f64], dh: &[f64], s: f64, steps: &[f64]) -> Result<OracleReport> {
    let lib = library(prob, q, h, dh, s)?;
    let base = evaluate(prob, q, h, s)?;
    let scale = sup(&lib).max(1e-300);
    let mut errors = Vec::with_capacity(steps.len());
    let mut fd = Vec::new();
    for &eps in steps {
        let plus = evaluate(prob, q, &shifted(h, dh, eps), s)?;
        let minus = evaluate(prob, q, &shifted(h, dh, -eps), s)?;
        fd = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let err = fd.iter().zip(&lib).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let floor = 100.0 * f64::EPSILON * sup(&base).max(1.0) / eps;
        if steps.len() > 1 && err < floor {
            return Err(Error::StepTooSmall(eps));
        }
        errors.push(err / scale);
    }
    let order = (errors.len() > 1).then(|| {
        let k = errors.len();
        (errors[k - 2] / errors[k - 1]).log2() / (steps[k - 2] / steps[k - 1]).log2()
    });
    Ok(OracleReport { quantity: q.name().to_string(), oracle: fd, library: lib, steps: steps.to_vec(), errors, order })
}

/// A real trigonometric polynomial of degree `max_k` in each variable with
/// coefficients uniform in `[−amp, amp]`, mean removed.
pub fn random_band_limited(grid: &TorusGrid, max_k: i64, amp: f64, rng: &mut impl Rng) -> Vec<f64> {
    let n = grid.dim();
    let count = (2 * max_k + 1).pow(n as u32) as usize;
    let terms: Vec<(Vec<i64>, f64, f64)> = (0..count)
        .map(|mut idx| {
            let k: Vec<i64> = (0..n)
                .map(|_| {
                    let v = (idx % (2 * max_k as usize + 1)) as i64 - max_k;
                    idx /= 2 * max_k as usize + 1;
                    v
                })
                .collect();
            (k, rng.gen_range(-amp..=amp), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let mut f = grid.sample(|t| {
        terms
            .iter()
            .map(|(k, a, ph)| a * (k.iter().zip(t).map(|(ki, ti)| *ki as f64 * ti).sum::<f64>() + ph).cos())
            .sum()
    });
    grid.remove_mean(&mut f);
    f
}
