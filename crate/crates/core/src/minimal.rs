//! The log-volume profile `u(x)` of toric fibres, its convex minimization,
//! the class map `Ψ(x) = [α]` of the solved H-minimal fibres, its derivative,
//! and the root solve `Ψ(x₁) = 0` for a minimal Lagrangian torus.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{self, jet_det};
use crate::kahler::{metric_from_potential, FamilyParams, KahlerPotential};
use crate::lagrangian::chart::{embed, GraphTorus};
use crate::lagrangian::forms::sup;
use crate::lagrangian::geometry::{second_fundamental, GeometrySample};
use crate::lagrangian::hodge::{harmonic_basis, hodge_decompose, Classification, HodgeTolerances};
use crate::lagrangian::variation::ricci_contract;
use crate::solver::{FiberProblem, SolverConfig};

/// `u = log Vol(F⁻¹(x))` under the unscaled toric metric `ρ⁰ = ρ_τ + f⁰`.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeProfile {
    pub x: Vec<f64>,
    pub u: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

/// `u` from `Vol = (2π)ⁿ √det(2 Hess ρ⁰) = (4π)ⁿ √det G_xx` with derivatives
/// from potential jets of order 4.
pub fn log_volume(p: &KahlerPotential, x: &[f64]) -> Result<VolumeProfile> {
    let n = p.dim();
    let sp = jet::space(2 * n, 4);
    let pj = p.potential_jet(sp, x, &vec![0.0; n], &FamilyParams::unscaled(p.tau(), 0.0))?;
    let g = metric_from_potential(&pj, n);
    let gxx: Vec<Vec<_>> = (0..n).map(|i| (0..n).map(|j| g[i][j].clone()).collect()).collect();
    let det = jet_det(&gxx);
    if !(det.value() > 0.0) {
        return Err(Error::DegenerateMetric(det.value()));
    }
    let u = det.ln().scale(0.5).add_const(n as f64 * (4.0 * PI).ln());
    Ok(VolumeProfile {
        x: x.to_vec(),
        u: u.value(),
        grad: (0..n).map(|i| u.d1(i)).collect(),
        hess: (0..n).map(|i| (0..n).map(|j| u.d2(i, j)).collect()).collect(),
    })
}

/// `u` by integrating the induced volume form over the toric fibre.
pub fn log_volume_quadrature(p: &KahlerPotential, x: &[f64], modes: usize) -> Result<f64> {
    let prob = FiberProblem::new(p, x, modes)?;
    let imm = embed(&GraphTorus::zero(prob.chart.clone(), prob.grid.clone()))?;
    let sample = second_fundamental(p, &FamilyParams::unscaled(p.tau(), 0.0), &imm, false)?;
    Ok(sample.volume().ln())
}

/// Minimizer of `u` over `Δ_{cτ}` with the boundary gap diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeMinimum {
    pub x0: Vec<f64>,
    pub u0: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// `min_{∂Δ_{cτ}} u − u(x₀)`, absent for unbounded regions.
    pub boundary_gap: Option<f64>,
    pub gap_at_least_one: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn inside(p: &KahlerPotential, x: &[f64], c: f64) -> bool {
    p.toric_part().in_region(x, c) && p.toric_part().in_domain(x)
}

/// Damped Newton on `u` from the origin.
pub fn minimize_volume(p: &KahlerPotential, c: f64) -> Result<VolumeMinimum> {
    let n = p.dim();
    let mut x = vec![0.0; n];
    let mut prof = log_volume(p, &x)?;
    let mut iterations = 0;
    while norm(&prof.grad) >= 1e-10 {
        if iterations == 60 {
            return Err(Error::NoMinimum(format!("gradient {:e} after {iterations} steps", norm(&prof.grad))));
        }
        let h = DMatrix::from_fn(n, n, |i, j| prof.hess[i][j]);
        let eig = h.clone().symmetric_eigen();
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max().abs().max(1e-300);
        if lmin < -1e-12 * lmax {
            return Err(Error::NotConvex(x));
        }
        if lmin <= 1e-12 * lmax || lmax < 1e-300 {
            return Err(Error::NoMinimum(format!("Hessian of u is singular at {x:?}, u is affine along a direction")));
        }
        let step = h.lu().solve(&DVector::from_column_slice(&prof.grad)).ok_or(Error::NotConvex(x.clone()))?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - lambda * b).collect();
            if inside(p, &trial, c) {
                if let Ok(tp) = log_volume(p, &trial) {
                    if tp.u <= prof.u + 1e-14 * prof.u.abs().max(1.0) || norm(&tp.grad) < norm(&prof.grad) {
                        x = trial;
                        prof = tp;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(Error::NoMinimum(format!("no descent inside the region from {x:?}")));
            }
        }
        iterations += 1;
    }
    let boundary_gap = boundary_min(p, &x, c, |y| log_volume(p, y).map(|v| v.u))?.map(|m| m - prof.u);
    Ok(VolumeMinimum {
        grad_norm: norm(&prof.grad),
        u0: prof.u,
        x0: x,
        iterations,
        gap_at_least_one: boundary_gap.is_some_and(|g| g >= 1.0),
        boundary_gap,
    })
}

fn directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64).map(|i| 2.0 * PI * i as f64 / 64.0).map(|a| vec![a.cos(), a.sin()]).collect(),
        _ => {
            let mut out = Vec::new();
            for j in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[j] = s;
                    out.push(v);
                }
            }
            out
        }
    }
}

/// Minimum of `f` over points of `∂Δ_{cτ}` reached along rays from `x`.
/// Points too close to the polytope boundary to evaluate are skipped.
fn boundary_min(p: &KahlerPotential, x: &[f64], c: f64, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Option<f64>> {
    let t = p.toric_part();
    if t.region_q(x, c).is_none() {
        return Ok(None);
    }
    let mut best: Option<f64> = None;
    for v in directions(x.len()) {
        let at = |s: f64| -> Vec<f64> { x.iter().zip(&v).map(|(a, b)| a + s * b).collect() };
        let mut hi = 1.0;
        while t.region_q(&at(hi), c).is_some_and(|q| q <= 0.0) {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if t.region_q(&at(mid), c).is_some_and(|q| q <= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if let Ok(val) = f(&at(lo)) {
            best = Some(best.map_or(val, |b: f64| b.min(val)));
        }
    }
    Ok(best)
}

/// `Ψ(x)` with diagnostics of the solved fibre.
#[derive(Debug, Clone, Serialize)]
pub struct CohomologyPoint {
    pub x: Vec<f64>,
    pub class: Vec<f64>,
    /// `sup |dα|`.
    pub d_alpha: f64,
    pub residual: f64,
    #[serde(skip)]
    pub h: Vec<f64>,
}

/// Solves the fibre over `x` and returns its sample at `s = 1`.
fn solve_sample(p: &KahlerPotential, x: &[f64], modes: usize, cfg: &SolverConfig) -> Result<(FiberProblem, Vec<f64>, f64, GeometrySample)> {
    let prob = FiberProblem::new(p, x, modes)?;
    let state = prob.continue_to(1.0, cfg)?;
    let sample = prob.geometry(&state.h, 1.0, true)?;
    Ok((prob, state.h, state.residual, sample))
}

fn point_from_sample(x: &[f64], h: Vec<f64>, residual: f64, sample: &GeometrySample) -> Result<CohomologyPoint> {
    let split = hodge_decompose(&sample.alpha, &sample.metric, HodgeTolerances::default())?;
    let da = sample.metric.d_one_form(&sample.alpha);
    Ok(CohomologyPoint { x: x.to_vec(), class: split.class, d_alpha: da.iter().map(|c| sup(c)).fold(0.0, f64::max), residual, h })
}

pub fn psi(p: &KahlerPotential, x: &[f64], modes: usize, cfg: &SolverConfig) -> Result<CohomologyPoint> {
    let (_, h, res, sample) = solve_sample(p, x, modes, cfg)?;
    point_from_sample(x, h, res, &sample)
}

/// `dΨ` with respect to the class coordinate `c = −∇ρ⁰(x)` (unscaled), from
/// `dΨ(e_j) = −[Ric(B_j, ·)]` with `B_j` the unscaled dual of the harmonic
/// form of class `e_j`. `ric` holds the tangent-restricted Ricci tensors of
/// `sample`, whose metric is `ĝ = τ² g`.
pub fn dpsi_formula(sample: &GeometrySample, ric: &[DMatrix<f64>], tau: f64) -> Result<DMatrix<f64>> {
    let n = sample.dim();
    let basis = harmonic_basis(&sample.metric)?;
    let mut out = DMatrix::zeros(n, n);
    for (j, beta) in basis.forms.iter().enumerate() {
        let mut form = ricci_contract(&sample.metric, ric, beta);
        form.iter_mut().flatten().for_each(|v| *v *= -tau * tau);
        let split = hodge_decompose(&form, &sample.metric, HodgeTolerances::default())?;
        for k in 0..n {
            out[(k, j)] = split.class[k];
        }
    }
    Ok(out)
}

/// `dc/dx = −Hess ρ⁰(x)`.
pub fn class_coordinate_jacobian(p: &KahlerPotential, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let sp = jet::space(2 * n, 2);
    let pj = p.potential_jet(sp, x, &vec![0.0; n], &FamilyParams::unscaled(p.tau(), 0.0))?;
    Ok(DMatrix::from_fn(n, n, |i, j| -pj.d2(i, j)))
}

/// Both routes for `dΨ/dc` at `x`.
#[derive(Debug, Clone, Serialize)]
pub struct DpsiCheck {
    pub x: Vec<f64>,
    pub formula: Vec<Vec<f64>>,
    pub finite_difference: Vec<Vec<f64>>,
    /// Spectral norm of the difference.
    pub difference: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Formula route at `x` against centered differences of `Ψ` over
/// neighbouring fibres `x ± δ e_i` and `x ± δ/2 e_i`, combined by Richardson
/// extrapolation to fourth order.
pub fn dpsi_check(p: &KahlerPotential, x: &[f64], delta: f64, modes: usize, cfg: &SolverConfig) -> Result<DpsiCheck> {
    let n = p.dim();
    let (_, _, _, sample) = solve_sample(p, x, modes, cfg)?;
    let ric = sample.ricci.clone().expect("sample carries Ricci");
    let formula = dpsi_formula(&sample, &ric, p.tau())?;
    let offsets = [delta, -delta, 0.5 * delta, -0.5 * delta];
    let shifted: Vec<Vec<f64>> = (0..n)
        .flat_map(|i| {
            offsets.into_iter().map(move |d| {
                let mut y = x.to_vec();
                y[i] += d;
                y
            })
        })
        .collect();
    let classes = crate::par::map_result(&shifted, |y| psi(p, y, modes, cfg).map(|c| c.class))?;
    let dpsi_dx = DMatrix::from_fn(n, n, |k, i| {
        let c = &classes[4 * i..4 * i + 4];
        let wide = (c[0][k] - c[1][k]) / (2.0 * delta);
        let narrow = (c[2][k] - c[3][k]) / delta;
        (4.0 * narrow - wide) / 3.0
    });
    let dcdx = class_coordinate_jacobian(p, x)?;
    let inv = dcdx.try_inverse().ok_or(Error::DegenerateMetric(0.0))?;
    let fd = dpsi_dx * inv;
    let difference = (&formula - &fd).singular_values().max();
    Ok(DpsiCheck { x: x.to_vec(), formula: rows(&formula), finite_difference: rows(&fd), difference })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimalStatus {
    Minimal,
    NotMinimalAtRoot,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalTorusReport {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub iterations: usize,
    pub psi: Vec<f64>,
    pub sup_alpha: f64,
    pub sup_codifferential: f64,
    pub sup_d_alpha: f64,
    pub harmonic_norm: f64,
    pub classification: Classification,
    pub status: MinimalStatus,
    /// `−max_m q_m(x₁)` relative to `Δ_{cτ}`; positive inside.
    pub interior_margin: Option<f64>,
    pub boundary_gap: Option<f64>,
    pub residual: f64,
    #[serde(skip)]
    pub h: Vec<f64>,
}

/// Newton on `x ↦ Ψ(x)` from the volume minimizer, with the formula route
/// times `dc/dx` as Jacobian.
pub fn find_minimal(p: &KahlerPotential, c: f64, modes: usize, cfg: &SolverConfig, psi_tol: f64) -> Result<MinimalTorusReport> {
    let vm = minimize_volume(p, c)?;
    let mut x = vm.x0.clone();
    let mut iterations = 0;
    loop {
        let (_, h, residual, sample) = solve_sample(p, &x, modes, cfg)?;
        let point = point_from_sample(&x, h, residual, &sample)?;
        let size = norm(&point.class);
        if size < psi_tol {
            let split = hodge_decompose(&sample.alpha, &sample.metric, HodgeTolerances::default())?;
            let classification = split.classification;
            return Ok(MinimalTorusReport {
                x0: vm.x0,
                x1: x.clone(),
                iterations,
                psi: point.class,
                sup_alpha: split.sup_alpha,
                sup_codifferential: split.sup_codifferential,
                sup_d_alpha: point.d_alpha,
                harmonic_norm: split.harmonic_norm(&sample.metric) / sample.metric.volume().sqrt(),
                status: if classification == Classification::Minimal { MinimalStatus::Minimal } else { MinimalStatus::NotMinimalAtRoot },
                classification,
                interior_margin: p.toric_part().region_q(&x, c).map(|q| -q),
                boundary_gap: vm.boundary_gap,
                residual,
                h: point.h,
            });
        }
        if iterations == 25 {
            return Err(Error::RootNotFound(format!("|Ψ| = {size:e} after {iterations} iterations at {x:?}")));
        }
        let ric = sample.ricci.as_ref().expect("sample carries Ricci");
        let jac = dpsi_formula(&sample, ric, p.tau())? * class_coordinate_jacobian(p, &x)?;
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&point.class))
            .ok_or_else(|| Error::RootNotFound(format!("singular dΨ at {x:?}")))?;
        x = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        if !inside(p, &x, c) {
            return Err(Error::ExitedRegion { x, gap: vm.boundary_gap.unwrap_or(f64::NAN) });
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{flat_model, line_fan, line_near_ke};
    use crate::toric::FanPotential;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn line_profile_matches_series_oracle() {
        let p = KahlerPotential::toric(Arc::new(FanPotential::new(line_fan(), 1.0)));
        let v = log_volume(&p, &[0.0]).unwrap();
        assert!(v.grad[0].abs() < 1e-14);
        let rho = crate::oracles::symbolic_1d("-2*log(1 - x^2)").unwrap().series(0.0, 6).unwrap();
        let u = rho.differentiate().differentiate().ln().unwrap().scale(0.5);
        assert_relative_eq!(v.hess[0][0], u.derivative_at(2), epsilon = 1e-12);
        assert_relative_eq!(v.hess[0][0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn routes_agree() {
        let p = line_near_ke(20.0, 0.05).unwrap();
        for x in [0.0, 3.0, -7.5] {
            let a = log_volume(&p, &[x]).unwrap().u;
            let b = log_volume_quadrature(&p, &[x], 6).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn flat_model_has_no_minimum() {
        assert!(matches!(minimize_volume(&flat_model(2), 0.5), Err(Error::NoMinimum(_))));
    }

    #[test]
    fn formula_route_special_cases() {
        let cfg = SolverConfig::default();
        let flat = flat_model(1);
        let (_, _, _, sample) = solve_sample(&flat, &[0.3], 6, &cfg).unwrap();
        let f = dpsi_formula(&sample, sample.ricci.as_ref().unwrap(), flat.tau()).unwrap();
        assert_eq!(f[(0, 0)], 0.0);
        let tau = 20.0;
        let p = line_near_ke(tau, 0.05).unwrap();
        let (_, _, _, sample) = solve_sample(&p, &[2.0], 6, &cfg).unwrap();
        let einstein: Vec<DMatrix<f64>> = sample.metric.g.iter().map(|g| -g / (tau * tau)).collect();
        let f = dpsi_formula(&sample, &einstein, tau).unwrap();
        assert_relative_eq!(f[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_family_roots_at_origin() {
        let p = line_near_ke(20.0, 0.0).unwrap();
        let r = find_minimal(&p, 0.5, 6, &SolverConfig::default(), 1e-10).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.x1[0].abs() < 1e-12);
        assert_eq!(r.status, MinimalStatus::Minimal);
        assert!((r.boundary_gap.unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
    }
}
