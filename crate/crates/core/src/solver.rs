//! The continuation solver for H-minimal tori: residual `Φ(h, s) = d*α`
//! of the flowed graph torus `φ_s(L(h))` under `ĝ_{τ,s}`, its linearization
//! `D_α(dδh)`, Newton iteration, continuation in `s`, and fibration sweeps.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::flow_points_fixed;
use crate::kahler::{FamilyParams, KahlerPotential};
use crate::lagrangian::chart::{embed, make_chart, FiberChart, GraphTorus, Immersion};
use crate::lagrangian::forms::{constant_form, form_axpy, sup, OneForm};
use crate::lagrangian::hodge::{hodge_decompose, HodgeTolerances};
use crate::lagrangian::geometry::{second_fundamental, GeometrySample};
use crate::lagrangian::variation::d_operator;
use crate::linsolve::{gmres, GmresOptions};
use crate::spectral::TorusGrid;

/// RK4 steps per unit of `s` used by the residual's flow.
pub const DEFAULT_FLOW_STEPS: usize = 16;

/// Everything needed to evaluate the residual over one base point.
#[derive(Debug, Clone)]
pub struct FiberProblem {
    pub potential: KahlerPotential,
    /// Rescaled family `ĝ_{τ,s} = τ² g_s`; its `s` field is ignored.
    pub family: FamilyParams,
    pub chart: Arc<FiberChart>,
    pub grid: TorusGrid,
    pub flow_steps: usize,
}

impl FiberProblem {
    pub fn new(p: &KahlerPotential, x_star: &[f64], modes: usize) -> Result<Self> {
        let family = FamilyParams::rescaled(p.tau(), 0.0);
        let chart = Arc::new(make_chart(p, &family, x_star)?);
        Ok(FiberProblem {
            potential: p.clone(),
            family,
            chart,
            grid: TorusGrid::new(p.dim(), modes),
            flow_steps: DEFAULT_FLOW_STEPS,
        })
    }

    pub fn with_grid(&self, modes: usize) -> Self {
        FiberProblem { grid: TorusGrid::new(self.grid.dim(), modes), ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn x_star(&self) -> &[f64] {
        &self.chart.x_star
    }

    pub fn graph(&self, h: &[f64]) -> GraphTorus {
        GraphTorus::new(self.chart.clone(), self.grid.clone(), h.to_vec())
    }

    /// `φ_s(L(h))` sampled on the grid.
    pub fn immersion(&self, h: &[f64], s: f64) -> Result<Immersion> {
        let mut imm = embed(&self.graph(h))?;
        if s != 0.0 && !self.potential.theta_independent() {
            let steps = ((self.flow_steps as f64 * s.abs()).ceil() as usize).max(2);
            imm.pts = flow_points_fixed(&self.potential, &self.family, &imm.pts, s, steps).map_err(|e| match e {
                Error::LeftRegion { s } => Error::FlowFailure(format!("torus point left the region at s = {s}")),
                Error::DegenerateMetric(v) => Error::FlowFailure(format!("degenerate metric along flow ({v:e})")),
                other => other,
            })?;
        }
        Ok(imm)
    }

    pub fn geometry(&self, h: &[f64], s: f64, with_ricci: bool) -> Result<GeometrySample> {
        let imm = self.immersion(h, s)?;
        second_fundamental(&self.potential, &self.family.at(s), &imm, with_ricci)
    }

    /// `Φ(h, s) = d*α` with zero `dV`-mean.
    pub fn residual(&self, h: &[f64], s: f64) -> Result<Vec<f64>> {
        Ok(self.geometry(h, s, false)?.codifferential_alpha())
    }

    /// `D_α(dδh)` on a geometry sample carrying Ricci.
    pub fn linearize_apply(&self, sample: &GeometrySample, dh: &[f64]) -> Vec<f64> {
        let beta = self.grid.gradient(dh);
        d_operator(sample, &beta)
    }
}


/// Newton and continuation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm tolerance on the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Uniform stages in `s` before adaptive halving.
    pub stages: usize,
    pub min_step: f64,
    pub linear_tol: f64,
    /// Smallest damping factor tried in the backtracking line search.
    pub min_damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: 12, stages: 10, min_step: 1.0 / 160.0, linear_tol: 1e-12, min_damping: 1.0 / 16.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.linear_tol > 0.0 && self.min_step > 0.0 && self.min_damping > 0.0) {
            return Err(Error::Dimension("solver tolerances must be positive".into()));
        }
        if self.stages == 0 {
            return Err(Error::Dimension("at least one continuation stage is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub h: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm residual before each step and after the last one.
    pub history: Vec<f64>,
    /// Largest `‖δh‖∞ / ‖Φ‖∞` over the accepted steps.
    pub inverse_norm: f64,
    /// Largest `‖Φ(h+δh) − Φ(h) − DΦ δh‖∞ / ‖δh‖∞²`.
    pub lipschitz: f64,
}

impl FiberProblem {
    /// `Φ` together with the geometry it came from.
    fn evaluate(&self, h: &[f64], s: f64) -> Result<(GeometrySample, Vec<f64>)> {
        let sample = self.geometry(h, s, true)?;
        let r = sample.codifferential_alpha();
        Ok((sample, r))
    }

    /// Inverse of `−Δ²` for the averaged metric, diagonal in Fourier space.
    fn bilaplacian_preconditioner(&self, sample: &GeometrySample) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let m = &sample.metric;
        let flux = m.mean_flux_metric();
        let vol = m.sqrt_det.iter().sum::<f64>() / m.len() as f64;
        let n = self.dim();
        move |r: &[f64]| {
            self.grid.apply_symbol(r, |k| {
                if k.iter().all(|&v| v == 0) {
                    return Complex64::new(0.0, 0.0);
                }
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += k[i] as f64 * flux[(i, j)] * k[j] as f64;
                    }
                }
                let lam = q / vol;
                Complex64::new(-1.0 / (lam * lam), 0.0)
            })
        }
    }

    /// Solves `D_α(dδh) = rhs` for mean-zero `δh`.
    pub fn solve_linearized(&self, sample: &GeometrySample, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let pre = self.bilaplacian_preconditioner(sample);
        let mut apply = |x: &[f64]| self.linearize_apply(sample, x);
        let opts = GmresOptions { rel_tol: tol, ..GmresOptions::default() };
        let mut x = gmres(&mut apply, &pre, rhs, opts)?.x;
        self.grid.remove_mean(&mut x);
        Ok(x)
    }

    /// `‖D_α(dδh) + Δ²δh‖ / ‖Δ²δh‖` for the given `δh`.
    pub fn bilaplacian_deviation(&self, sample: &GeometrySample, dh: &[f64]) -> f64 {
        let lin = self.linearize_apply(sample, dh);
        let m = &sample.metric;
        let bi = m.laplacian(&m.laplacian(dh));
        let dev: Vec<f64> = lin.iter().zip(&bi).map(|(a, b)| a + b).collect();
        sup(&dev) / sup(&bi).max(1e-300)
    }

    /// Damped Newton iteration for `Φ(h, s) = 0` starting from `h_init`.
    pub fn newton_solve(&self, s: f64, h_init: &[f64], cfg: &SolverConfig) -> Result<NewtonOutcome> {
        let mut h = h_init.to_vec();
        self.grid.remove_mean(&mut h);
        let (mut sample, mut r) = self.evaluate(&h, s)?;
        let mut res = sup(&r);
        let mut history = vec![res];
        let (mut inverse_norm, mut lipschitz): (f64, f64) = (0.0, 0.0);
        let mut iterations = 0;
        while res >= cfg.tol {
            if iterations == cfg.max_iter {
                return Err(Error::MaxIterations { iterations, residual: res });
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let dh = self.solve_linearized(&sample, &rhs, cfg.linear_tol)?;
            let step = sup(&dh);
            inverse_norm = inverse_norm.max(step / res);
            let lin = self.linearize_apply(&sample, &dh);
            let mut lambda = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = h.iter().zip(&dh).map(|(a, b)| a + lambda * b).collect();
                match self.evaluate(&trial, s) {
                    Ok((ts, tr)) if sup(&tr) < res => break Some((trial, ts, tr)),
                    Ok(_) | Err(Error::OutOfChart(_)) | Err(Error::FlowFailure(_)) | Err(Error::DegenerateMetric(_)) => {}
                    Err(e) => return Err(e),
                }
                lambda *= 0.5;
                if lambda < cfg.min_damping {
                    break None;
                }
            };
            let Some((trial, ts, tr)) = accepted else {
                return Err(Error::MaxIterations { iterations, residual: res });
            };
            if lambda == 1.0 && step > 0.0 {
                let rem: Vec<f64> = (0..r.len()).map(|p| tr[p] - r[p] - lin[p]).collect();
                lipschitz = lipschitz.max(sup(&rem) / (step * step));
            }
            h = trial;
            sample = ts;
            r = tr;
            res = sup(&r);
            history.push(res);
            iterations += 1;
        }
        Ok(NewtonOutcome { h, iterations, residual: res, history, inverse_norm, lipschitz })
    }
}

/// Diagnostics of one accepted continuation stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub s: f64,
    pub step: f64,
    /// `‖Φ(h_prev, s)‖∞` before Newton starts.
    pub residual_jump: f64,
    pub residual: f64,
    pub iterations: usize,
    pub inverse_norm: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationState {
    pub s: f64,
    pub h: Vec<f64>,
    pub residual: f64,
    pub inverse_norm: f64,
    pub lipschitz: f64,
    pub stages: Vec<StageRecord>,
}

impl FiberProblem {
    /// Marches `s` from 0 to `s_end` with warm starts, halving the step on failure.
    pub fn continue_to(&self, s_end: f64, cfg: &SolverConfig) -> Result<ContinuationState> {
        cfg.validate()?;
        let zero = vec![0.0; self.grid.len()];
        let first = self.newton_solve(0.0, &zero, cfg)?;
        let mut state = ContinuationState {
            s: 0.0,
            h: first.h,
            residual: first.residual,
            inverse_norm: first.inverse_norm,
            lipschitz: first.lipschitz,
            stages: Vec::new(),
        };
        let uniform = s_end / cfg.stages as f64;
        let mut step = uniform;
        while state.s < s_end {
            let mut target = (state.s + step).min(s_end);
            if s_end - target < 1e-9 * uniform {
                target = s_end;
            }
            let jump = self.residual(&state.h, target).map(|r| sup(&r)).unwrap_or(f64::INFINITY);
            match self.newton_solve(target, &state.h, cfg) {
                Ok(out) => {
                    state.stages.push(StageRecord {
                        s: target,
                        step: target - state.s,
                        residual_jump: jump,
                        residual: out.residual,
                        iterations: out.iterations,
                        inverse_norm: out.inverse_norm,
                        lipschitz: out.lipschitz,
                    });
                    state.inverse_norm = state.inverse_norm.max(out.inverse_norm);
                    state.lipschitz = state.lipschitz.max(out.lipschitz);
                    state.s = target;
                    state.h = out.h;
                    state.residual = out.residual;
                    step = (2.0 * step).min(uniform);
                }
                Err(_) => {
                    step *= 0.5;
                    if step < cfg.min_step * (1.0 - 1e-12) {
                        return Err(Error::StepUnderflow { s: state.s });
                    }
                }
            }
        }
        Ok(state)
    }
}

/// Continuation from the toric fiber over `x` to `s = 1`.
pub fn continue_path(p: &KahlerPotential, x: &[f64], modes: usize, cfg: &SolverConfig) -> Result<ContinuationState> {
    FiberProblem::new(p, x, modes)?.continue_to(1.0, cfg)
}

/// One solved fiber of the fibration.
#[derive(Debug, Clone)]
pub struct FiberSolution {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub residual: f64,
    /// Harmonic coefficients of `α`.
    pub class: Vec<f64>,
    /// `min_j min_θ |β_j|_g` over the H-minimal deformation forms `β_j = dt_j + dψ_j`.
    pub margin: f64,
    /// `min_j |dt_j|_g` on the toric fiber under the toric metric.
    pub toric_margin: f64,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug)]
pub struct FibrationResult {
    pub fibers: Vec<(Vec<f64>, Result<FiberSolution>)>,
}

impl FibrationResult {
    pub fn solved(&self) -> impl Iterator<Item = &FiberSolution> {
        self.fibers.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Vec<f64>, &Error)> {
        self.fibers.iter().filter_map(|(x, r)| r.as_ref().err().map(|e| (x, e)))
    }
}

impl FiberProblem {
    /// The H-minimal deformation forms `β_j = dt_j + dψ_j` with `D_α β_j = 0`.
    pub fn deformation_forms(&self, sample: &GeometrySample, tol: f64) -> Result<Vec<OneForm>> {
        let n = self.dim();
        let len = self.grid.len();
        (0..n)
            .map(|j| {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                let e = constant_form(&c, len);
                let rhs: Vec<f64> = d_operator(sample, &e).into_iter().map(|v| -v).collect();
                let psi = if sup(&rhs) == 0.0 { vec![0.0; len] } else { self.solve_linearized(sample, &rhs, tol)? };
                let mut beta = e;
                form_axpy(&mut beta, 1.0, &self.grid.gradient(&psi));
                Ok(beta)
            })
            .collect()
    }

    pub fn margin(&self, sample: &GeometrySample, tol: f64) -> Result<f64> {
        let forms = self.deformation_forms(sample, tol)?;
        Ok(forms
            .iter()
            .map(|b| sample.metric.norm_pointwise(b).into_iter().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min))
    }

    fn toric_margin(&self) -> Result<f64> {
        let toric = KahlerPotential::toric(self.potential.toric_part().clone());
        let imm = embed(&self.graph(&vec![0.0; self.grid.len()]))?;
        let sample = second_fundamental(&toric, &self.family.at(0.0), &imm, false)?;
        let n = self.dim();
        Ok((0..n)
            .map(|j| {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                sample.metric.norm_pointwise(&constant_form(&c, self.grid.len()))[0]
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Continuation to `s = 1` plus class and nondegeneracy margin.
    pub fn solve_fiber(&self, cfg: &SolverConfig) -> Result<FiberSolution> {
        let state = self.continue_to(1.0, cfg)?;
        let sample = self.geometry(&state.h, 1.0, true)?;
        let split = hodge_decompose(&sample.alpha, &sample.metric, HodgeTolerances::default())?;
        Ok(FiberSolution {
            x: self.x_star().to_vec(),
            margin: self.margin(&sample, cfg.linear_tol)?,
            toric_margin: self.toric_margin()?,
            h: state.h,
            residual: state.residual,
            class: split.class,
            stages: state.stages,
        })
    }
}

/// Solves every base point independently; points outside `Δ_{cτ}` and solver
/// failures are reported per point.
pub fn sweep_fibration(p: &KahlerPotential, base: &[Vec<f64>], c: f64, modes: usize, cfg: &SolverConfig) -> FibrationResult {
    let fibers = crate::par::map(base, |x| {
        let r = if p.toric_part().in_region(x, c) {
            FiberProblem::new(p, x, modes).and_then(|prob| prob.solve_fiber(cfg))
        } else {
            Err(Error::OutOfChart(format!("base point {x:?} lies outside the region c = {c}")))
        };
        (x.clone(), r)
    });
    FibrationResult { fibers }
}
