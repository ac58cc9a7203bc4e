//! The oracle suite behind `verify`: every library quantity that has an
//! independent route is recomputed and compared.

use std::sync::Arc;

use lagfib::flow::{flow_between, flow_map, probe_loop, pullback_defect, FlowOptions};
use lagfib::kahler::{sup_oscillation, FamilyParams, KahlerPotential};
use lagfib::lagrangian::forms::sup;
use lagfib::minimal::{dpsi_formula, log_volume};
use lagfib::models::{flat_model, line_fan, line_model, line_near_ke};
use lagfib::oracles::{fd_deform, flat_torus_oracle, random_band_limited, symbolic_1d, Quantity};
use lagfib::solver::FiberProblem;
use lagfib::toric::{FanPotential, ToricPotential};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::Run;
use crate::output::{conventions_json, num};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub oracle: String,
    pub value: Option<f64>,
    pub tolerance: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, oracle: &str, value: f64, tolerance: &str, pass: bool) -> Check {
    Check { name: name.into(), oracle: oracle.into(), value: value.is_finite().then_some(value), tolerance: tolerance.into(), pass, detail: String::new() }
}

fn below(name: &str, oracle: &str, value: f64, tol: f64) -> Check {
    check(name, oracle, value, &format!("< {tol:e}"), value < tol)
}

fn failed(name: &str, oracle: &str, e: impl std::fmt::Display) -> Check {
    Check { name: name.into(), oracle: oracle.into(), value: None, tolerance: String::new(), pass: false, detail: e.to_string() }
}

type Checks = Result<Vec<Check>, lagfib::Error>;

fn flat_torus() -> Checks {
    let oracle = "parametric product torus";
    let p = flat_model(2);
    let x = [0.4, -0.7];
    let prob = FiberProblem::new(&p, &x, 8)?;
    let sample = prob.geometry(&vec![0.0; prob.grid.len()], 0.0, false)?;
    let radii: Vec<f64> = x.iter().map(|v| (0.5 * v).exp()).collect();
    let (mut e_alpha, mut e_metric, mut e_a) = (0.0f64, 0.0f64, 0.0f64);
    for (idx, t) in prob.grid.points().iter().enumerate() {
        let o = flat_torus_oracle(&radii, t);
        for k in 0..2 {
            e_alpha = e_alpha.max((sample.alpha[k][idx] - o.alpha[k]).abs());
        }
        e_metric = e_metric.max((&sample.metric.g[idx] - &o.metric).amax());
        e_a = e_a.max(sample.a[idx].iter().zip(&o.a).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    }
    Ok(vec![
        below("flat.alpha", oracle, e_alpha, 1e-8),
        below("flat.metric", oracle, e_metric, 1e-8),
        below("flat.second_fundamental", oracle, e_a, 1e-8),
        below("flat.codifferential", "exact zero", sup(&sample.codifferential_alpha()), 1e-9),
        below("flat.symmetry", "exact zero", sample.symmetry_defect, 1e-8),
    ])
}

fn series() -> Checks {
    let oracle = "truncated power series";
    let mut out = Vec::new();
    for tau in [1.0, 20.0] {
        let toric = FanPotential::new(line_fan(), tau);
        let rho = symbolic_1d(&format!("-2*log(1 - x/{tau}) - 2*log(1 + x/{tau})"))?;
        let (mut e_rho, mut e_u) = (0.0f64, 0.0f64);
        for x in [0.0, 0.3 * tau, -0.55 * tau] {
            let s = rho.series(x, 6)?;
            let jet = toric.rho_jet(&[x], 4)?;
            for k in 1..=4 {
                let lib = jet.partial(&[k as u8]);
                e_rho = e_rho.max((lib - s.derivative_at(k)).abs() / s.derivative_at(k).abs().max(1e-300));
            }
            // u = ½ log ρ'' + const
            let u = s.differentiate().differentiate().ln()?.scale(0.5);
            let vp = log_volume(&KahlerPotential::toric(Arc::new(toric.clone())), &[x])?;
            e_u = e_u.max((vp.hess[0][0] - u.derivative_at(2)).abs().max((vp.grad[0] - u.derivative_at(1)).abs()));
        }
        out.push(below(&format!("series.rho_derivatives.tau{tau}"), oracle, e_rho, 1e-10));
        out.push(below(&format!("series.log_volume.tau{tau}"), oracle, e_u, 1e-8));
    }
    let vp = log_volume(&KahlerPotential::toric(Arc::new(FanPotential::new(line_fan(), 1.0))), &[0.0])?;
    out.push(below("series.u_second_derivative_is_3", oracle, (vp.hess[0][0] - 3.0).abs(), 1e-8));
    Ok(out)
}

fn deformations(rng: &mut ChaCha8Rng) -> Checks {
    let p = line_model(20.0, 0.05)?;
    let prob = FiberProblem::new(&p, &[0.0], 20)?;
    let mut out = Vec::new();
    for (q, name) in [(Quantity::Volume, "volume"), (Quantity::Alpha, "alpha"), (Quantity::Codifferential, "codifferential")] {
        for case in 0..2 {
            let h = random_band_limited(&prob.grid, 3, 0.02, rng);
            let dh = random_band_limited(&prob.grid, 3, 1.0, rng);
            let r = fd_deform(&prob, q, &h, &dh, 1.0, &[4e-3, 2e-3])?;
            let ratio = r.ratios()[0];
            out.push(check(&format!("deform.{name}.{case}"), "centered differences, error ratio under halving", ratio, "in [3.5, 4.5]", (3.5..=4.5).contains(&ratio)));
        }
    }
    // the normal-variation linearization is exact where d*α = 0
    let coarse = prob.with_grid(10);
    let h = coarse.continue_to(1.0, &Default::default())?.h;
    let dh = random_band_limited(&coarse.grid, 3, 1.0, rng);
    let sample = coarse.geometry(&h, 1.0, true)?;
    let lin = coarse.linearize_apply(&sample, &dh);
    let eps = 5e-4;
    let shift = |e: f64| -> Vec<f64> { h.iter().zip(&dh).map(|(a, b)| a + e * b).collect() };
    let rp = coarse.residual(&shift(eps), 1.0)?;
    let rm = coarse.residual(&shift(-eps), 1.0)?;
    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    let err = fd.iter().zip(&lin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / sup(&fd);
    out.push(below("deform.solver_linearization", "centered differences of the residual", err, 1e-4));
    Ok(out)
}

fn toric_rigidity() -> Checks {
    let tau = 20.0;
    let p = KahlerPotential::toric(Arc::new(FanPotential::new(line_fan(), tau)));
    let prob = FiberProblem::new(&p, &[0.3 * tau], 8)?;
    let sample = prob.geometry(&vec![0.0; prob.grid.len()], 0.0, false)?;
    let spread = |f: &[f64]| f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
    let g: Vec<f64> = (0..prob.grid.len()).map(|i| sample.metric.g[i][(0, 0)]).collect();
    let scale = sup(&g);
    Ok(vec![
        below("toric.metric_theta_variation", "exact invariance", spread(&g) / scale, 1e-9),
        below("toric.alpha_theta_variation", "exact invariance", spread(&sample.alpha[0]), 1e-9),
        below("toric.codifferential", "exact zero", sup(&sample.codifferential_alpha()), 1e-9),
    ])
}

fn flow(run: &Run) -> Checks {
    let p = &run.model.potential;
    if p.theta_independent() {
        return Ok(vec![check("flow.pullback", "trivial flow", 0.0, "theta-independent model", true)]);
    }
    let fp = FamilyParams::rescaled(p.tau(), 0.0);
    let opts = FlowOptions { tol: 1e-9, ..Default::default() };
    let (mut defect, mut reversal) = (0.0f64, 0.0f64);
    for start in probe_loop(&run.cfg.fiber_x, 9) {
        let r = flow_map(p, &fp, &start, 1.0, &opts)?;
        defect = defect.max(pullback_defect(p, &fp, &start, 1.0, &r)?);
        let back = flow_between(p, &fp, &r.end, 1.0, 0.0, &opts)?;
        reversal = reversal.max(back.end.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok(vec![
        below("flow.symplectic_pullback", "Omega_s pulled back equals Omega_0", defect, 10.0 * opts.tol),
        below("flow.time_reversal", "backward flow returns to the start", reversal, 10.0 * opts.tol),
    ])
}

fn decay() -> Checks {
    let mut sups = Vec::new();
    for tau in [20.0, 40.0, 80.0] {
        let p = line_near_ke(tau, 0.05)?;
        let xs: Vec<Vec<f64>> = (-10..=10).map(|i| vec![0.05 * i as f64 * tau]).collect();
        sups.push(sup_oscillation(p.split().expect("perturbed"), &xs, 4));
    }
    let ratio = (sups[0] / sups[1]).min(sups[1] / sups[2]);
    Ok(vec![check("decay.oscillation_ratio", "tau^-3 scaling of the angular modes", ratio, ">= 2", ratio >= 2.0)])
}

fn dpsi_special_cases() -> Checks {
    let flat = flat_model(1);
    let prob = FiberProblem::new(&flat, &[0.3], 8)?;
    let sample = prob.geometry(&vec![0.0; prob.grid.len()], 0.0, true)?;
    let ric = sample.ricci.clone().expect("requested");
    let zero = dpsi_formula(&sample, &ric, 1.0)?.amax();

    let tau = 20.0;
    let p = line_model(tau, 0.05)?;
    let prob = FiberProblem::new(&p, &[0.1 * tau], 8)?;
    let h = random_band_limited(&prob.grid, 2, 0.01, &mut ChaCha8Rng::seed_from_u64(3));
    let sample = prob.geometry(&h, 1.0, false)?;
    let einstein: Vec<DMatrix<f64>> = (0..prob.grid.len()).map(|i| &sample.metric.g[i] * (-1.0 / (tau * tau))).collect();
    let id = (dpsi_formula(&sample, &einstein, tau)? - DMatrix::identity(1, 1)).amax();
    Ok(vec![
        check("dpsi.flat_is_zero", "exact zero", zero, "== 0", zero == 0.0),
        below("dpsi.einstein_is_identity", "exact identity", id, 1e-12),
    ])
}

fn guard(name: &str, oracle: &str, r: Checks) -> Vec<Check> {
    r.unwrap_or_else(|e| vec![failed(name, oracle, e)])
}

pub fn run_suite(run: &Run) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.cfg.seed);
    let mut checks = Vec::new();
    checks.extend(guard("flat", "parametric product torus", flat_torus()));
    checks.extend(guard("series", "truncated power series", series()));
    checks.extend(guard("deform", "centered differences", deformations(&mut rng)));
    checks.extend(guard("toric", "exact invariance", toric_rigidity()));
    checks.extend(guard("flow", "symplectic pullback", flow(run)));
    checks.extend(guard("decay", "tau scaling", decay()));
    checks.extend(guard("dpsi", "special cases", dpsi_special_cases()));
    checks
}

pub fn verify(run: &Run) -> Result<(), CliError> {
    let checks = run_suite(run);
    let passed = checks.iter().filter(|c| c.pass).count();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), c.oracle.clone(), c.value.map(num).unwrap_or_default(), c.tolerance.clone(), c.pass.to_string(), c.detail.clone()])
        .collect();
    let cols: Vec<String> = ["check", "oracle", "value", "tolerance", "pass", "detail"].map(String::from).to_vec();
    run.out.table("verify.csv", "oracle checks", "values are relative errors, ratios or sup-norm defects as named", &run.cfg, &cols, &rows)?;
    let report = serde_json::json!({
        "run": crate::output::run_json(&run.cfg, &run.model.shift),
        "conventions": conventions_json(),
        "total": checks.len(),
        "passed": passed,
        "checks": checks,
    });
    run.out.json("verify.json", &report)?;
    for c in &checks {
        let value = c.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| c.detail.clone());
        run_say(run, format!("{} {:<40} {value} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.tolerance));
    }
    run_say(run, format!("{passed} of {} checks passed", checks.len()));
    if passed == checks.len() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{} of {} checks failed", checks.len() - passed, checks.len())))
    }
}

fn run_say(run: &Run, line: String) {
    if !run.quiet {
        println!("{line}");
    }
}
