//! Browser bindings for the near-Einstein line model.
//!
//! Each export takes plain numbers and returns a JSON string; errors come
//! back as `{"error": "..."}` so the page never has to catch exceptions.

use lagfib::lagrangian::forms::sup;
use lagfib::minimal::{find_minimal, log_volume, minimize_volume, MinimalStatus};
use lagfib::models::line_near_ke;
use lagfib::solver::{FiberProblem, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Profile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_xx: Vec<f64>,
    pub x0: f64,
    pub boundary_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Fiber {
    /// Fibre angle t in [0, 2π).
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub sup_h: f64,
    pub residual: f64,
    pub stages: usize,
    pub newton_steps: usize,
}

#[derive(Debug, Serialize)]
pub struct Minimal {
    pub x0: f64,
    pub x1: f64,
    pub class: f64,
    pub sup_alpha: f64,
    pub iterations: usize,
    pub minimal: bool,
}

fn check(tau: f64, eps: f64) -> Result<(), String> {
    if !(tau >= 2.0 && tau.is_finite()) {
        return Err(format!("tau must be at least 2, got {tau}"));
    }
    if !(eps.abs() <= 1.0) {
        return Err(format!("eps must lie in [-1, 1], got {eps}"));
    }
    Ok(())
}

/// `u = log Vol` at `points` equispaced base points of `[-cτ, cτ]`.
pub fn volume_profile(tau: f64, eps: f64, c: f64, points: usize) -> Result<Profile, String> {
    check(tau, eps)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(format!("c must lie in (0, 1), got {c}"));
    }
    let points = points.clamp(2, 400);
    let p = line_near_ke(tau, eps).map_err(|e| e.to_string())?;
    let mut out = Profile { x: Vec::new(), u: Vec::new(), u_xx: Vec::new(), x0: 0.0, boundary_gap: None };
    for i in 0..points {
        let x = c * tau * (-1.0 + 2.0 * i as f64 / (points - 1) as f64);
        let v = log_volume(&p, &[x]).map_err(|e| e.to_string())?;
        out.x.push(x);
        out.u.push(v.u);
        out.u_xx.push(v.hess[0][0]);
    }
    let vm = minimize_volume(&p, c).map_err(|e| e.to_string())?;
    out.x0 = vm.x0[0];
    out.boundary_gap = vm.boundary_gap;
    Ok(out)
}

/// The H-minimal deformation of the toric fibre over `x`.
pub fn solve_fiber(tau: f64, eps: f64, x: f64, modes: usize) -> Result<Fiber, String> {
    check(tau, eps)?;
    let p = line_near_ke(tau, eps).map_err(|e| e.to_string())?;
    let prob = FiberProblem::new(&p, &[x], modes.clamp(2, 32)).map_err(|e| e.to_string())?;
    let st = prob.continue_to(1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
    Ok(Fiber {
        t: prob.grid.points().into_iter().map(|t| t[0]).collect(),
        sup_h: sup(&st.h),
        residual: st.residual,
        stages: st.stages.len(),
        newton_steps: st.stages.iter().map(|s| s.iterations).sum(),
        h: st.h,
    })
}

/// The minimal torus near the volume minimizer.
pub fn minimal_torus(tau: f64, eps: f64, modes: usize) -> Result<Minimal, String> {
    check(tau, eps)?;
    let p = line_near_ke(tau, eps).map_err(|e| e.to_string())?;
    let r = find_minimal(&p, 0.5, modes.clamp(2, 32), &SolverConfig::default(), 1e-10).map_err(|e| e.to_string())?;
    Ok(Minimal {
        x0: r.x0[0],
        x1: r.x1[0],
        class: r.psi[0],
        sup_alpha: r.sup_alpha,
        iterations: r.iterations,
        minimal: r.status == MinimalStatus::Minimal,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| serde_json::json!({ "error": e.to_string() }).to_string()),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = volumeProfile)]
pub fn volume_profile_js(tau: f64, eps: f64, c: f64, points: usize) -> String {
    to_json(volume_profile(tau, eps, c, points))
}

#[wasm_bindgen(js_name = solveFiber)]
pub fn solve_fiber_js(tau: f64, eps: f64, x: f64, modes: usize) -> String {
    to_json(solve_fiber(tau, eps, x, modes))
}

#[wasm_bindgen(js_name = minimalTorus)]
pub fn minimal_torus_js(tau: f64, eps: f64, modes: usize) -> String {
    to_json(minimal_torus(tau, eps, modes))
}
