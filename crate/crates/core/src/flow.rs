//! Integration of the Hamiltonian-gradient flow `dX/ds = V(X, s)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kahler::{ham_field, metric_jet, FamilyParams, KahlerPotential};

/// Outcome of an adaptive flow with its variational matrix and diagnostics.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub end: Vec<f64>,
    /// `Dφ` at the start point.
    pub jacobian: DMatrix<f64>,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub tol: f64,
    /// Region parameter `c` of `Δ_{cτ}`.
    pub c: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-10, c: 0.9, max_steps: 100_000, min_step: 1e-12 }
    }
}

fn split_state(n: usize, y: &[f64]) -> (&[f64], &[f64]) {
    (&y[..n], &y[n..2 * n])
}

/// Right-hand side of the state and (optionally) variational equation.
fn rhs(p: &KahlerPotential, fp: &FamilyParams, s: f64, y: &[f64], var: bool) -> Result<Vec<f64>> {
    let n = p.dim();
    let d = 2 * n;
    let (x, th) = split_state(n, y);
    let (v, jac) = ham_field(p, &fp.at(s), x, th, var)?;
    let mut out = v;
    if let Some(a) = jac {
        let m = DMatrix::from_column_slice(d, d, &y[d..d + d * d]);
        let am = a * m;
        out.extend_from_slice(am.as_slice());
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn check_region(p: &KahlerPotential, y: &[f64], c: f64, s: f64) -> Result<()> {
    let n = p.dim();
    if y[..2 * n].iter().any(|v| !v.is_finite()) || !p.toric_part().in_region(&y[..n], c) {
        return Err(Error::LeftRegion { s });
    }
    Ok(())
}

fn integrate(
    p: &KahlerPotential,
    fp: &FamilyParams,
    y0: Vec<f64>,
    s0: f64,
    s1: f64,
    var: bool,
    opts: &FlowOptions,
) -> Result<(Vec<f64>, usize, usize)> {
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let span = (s1 - s0).abs();
    let mut y = y0;
    let mut s = s0;
    let mut h = (span * 0.1).max(opts.min_step);
    let (mut steps, mut rejected) = (0, 0);
    check_region(p, &y, opts.c, s)?;
    if span == 0.0 {
        return Ok((y, 0, 0));
    }
    let mut k1 = rhs(p, fp, s, &y, var)?;
    while dir * (s1 - s) > 1e-15 * span.max(1.0) {
        if steps + rejected > opts.max_steps {
            return Err(Error::StepUnderflow { s });
        }
        h = h.min((s1 - s).abs());
        let mut ks: Vec<Vec<f64>> = vec![k1.clone()];
        let mut failed = false;
        for i in 1..7 {
            let yi: Vec<f64> = (0..y.len())
                .map(|c| y[c] + dir * h * (0..i).map(|j| A[i][j] * ks[j][c]).sum::<f64>())
                .collect();
            if check_region(p, &yi, opts.c, s + dir * C[i] * h).is_err() {
                failed = true;
                break;
            }
            match rhs(p, fp, s + dir * C[i] * h, &yi, var) {
                Ok(k) => ks.push(k),
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            rejected += 1;
            h *= 0.25;
            if h < opts.min_step {
                return Err(Error::LeftRegion { s });
            }
            continue;
        }
        let y5: Vec<f64> =
            (0..y.len()).map(|c| y[c] + dir * h * (0..7).map(|j| B5[j] * ks[j][c]).sum::<f64>()).collect();
        let mut err: f64 = 0.0;
        for c in 0..y.len() {
            let e = h * (0..7).map(|j| (B5[j] - B4[j]) * ks[j][c]).sum::<f64>();
            let sc = opts.tol * (1.0 + y[c].abs().max(y5[c].abs()));
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            s += dir * h;
            y = y5;
            k1 = ks.pop().expect("seven stages");
            steps += 1;
        } else {
            rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < opts.min_step {
            return Err(Error::StepUnderflow { s });
        }
    }
    Ok((y, steps, rejected))
}

/// Flows `start = (x, θ)` from `s_from` to `s_to` with adaptive
/// Dormand–Prince stepping, carrying the variational matrix `Dφ`.
pub fn flow_between(
    p: &KahlerPotential,
    fp: &FamilyParams,
    start: &[f64],
    s_from: f64,
    s_to: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let d = 2 * p.dim();
    if start.len() != d {
        return Err(Error::Dimension(format!("flow start has {} coordinates, expected {d}", start.len())));
    }
    let mut y0 = start.to_vec();
    y0.extend_from_slice(DMatrix::<f64>::identity(d, d).as_slice());
    let (y, steps, rejected) = integrate(p, fp, y0, s_from, s_to, true, opts)?;
    Ok(FlowResult {
        end: y[..d].to_vec(),
        jacobian: DMatrix::from_column_slice(d, d, &y[d..]),
        steps,
        rejected,
    })
}

/// `φ_{s_target}(start)` for the family `fp`; see [`flow_between`].
pub fn flow_map(
    p: &KahlerPotential,
    fp: &FamilyParams,
    start: &[f64],
    s_target: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    flow_between(p, fp, start, 0.0, s_target, opts)
}

/// `max |(Dφ)ᵀ Ω_s(φ(p)) Dφ − Ω_0(p)| / max |Ω_0(p)|`.
pub fn pullback_defect(
    p: &KahlerPotential,
    fp: &FamilyParams,
    start: &[f64],
    s: f64,
    res: &FlowResult,
) -> Result<f64> {
    let n = p.dim();
    let m0 = metric_jet(p, &start[..n], &start[n..], 0, &fp.at(0.0))?;
    let m1 = metric_jet(p, &res.end[..n], &res.end[n..], 0, &fp.at(s))?;
    let o0 = m0.kahler_form();
    let o1 = m1.kahler_form();
    let pulled = res.jacobian.transpose() * o1 * &res.jacobian;
    Ok((pulled - &o0).amax() / o0.amax())
}

/// Points `(x*, 2t)` on a loop through the fibre over `x*`: `t_j = 2πk/count`
/// along the diagonal direction, offset per axis so all angles vary.
pub fn probe_loop(x_star: &[f64], count: usize) -> Vec<Vec<f64>> {
    let n = x_star.len();
    (0..count)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let mut pt = x_star.to_vec();
            for j in 0..n {
                pt.push(2.0 * (t + 0.7 * j as f64));
            }
            pt
        })
        .collect()
}

/// Flows many points with a fixed number of classical RK4 steps. The map
/// is a smooth function of the start points, which keeps Newton iterations
/// built on top of it well conditioned.
pub fn flow_points_fixed(
    p: &KahlerPotential,
    fp: &FamilyParams,
    points: &[Vec<f64>],
    s_target: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let steps = steps.max(1);
    let run = |y0: &Vec<f64>| -> Result<Vec<f64>> {
        let mut y = y0.clone();
        let h = s_target / steps as f64;
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = rhs(p, fp, s, &y, false)?;
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
            let k2 = rhs(p, fp, s + 0.5 * h, &y2, false)?;
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
            let k3 = rhs(p, fp, s + 0.5 * h, &y3, false)?;
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
            let k4 = rhs(p, fp, s + h, &y4, false)?;
            for c in 0..y.len() {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        Ok(y)
    };
    if s_target == 0.0 || p.theta_independent() {
        return Ok(points.to_vec());
    }
    crate::par::map_result(points, run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kahler::{Mode, ModeSum};
    use crate::toric::{FanPotential, FlatPotential, WeightedFan};
    use std::sync::Arc;

    fn line_perturbed(tau: f64, eps: f64) -> KahlerPotential {
        let fan = WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-1.0, -1.0]).unwrap();
        let mode = Mode { k: vec![1], center: vec![0.0], width: 0.6, amp: eps, phase: 0.0 };
        let f = ModeSum::new(1, tau, vec![mode]);
        KahlerPotential::perturbed(Arc::new(FanPotential::new(fan, tau)), Arc::new(f)).unwrap()
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let p = KahlerPotential::toric(Arc::new(FlatPotential { dim: 2 }));
        let fp = FamilyParams::rescaled(1.0, 0.0);
        let r = flow_map(&p, &fp, &[0.1, 0.2, 0.3, 0.4], 1.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.end, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn pullback_and_reversal_on_line_model() {
        let tau = 20.0;
        let p = line_perturbed(tau, 0.05);
        let fp = FamilyParams::rescaled(tau, 0.0);
        let opts = FlowOptions { tol: 1e-9, ..Default::default() };
        for start in probe_loop(&[1.0], 17) {
            let r = flow_map(&p, &fp, &start, 1.0, &opts).unwrap();
            let defect = pullback_defect(&p, &fp, &start, 1.0, &r).unwrap();
            assert!(defect < 10.0 * opts.tol, "defect {defect}");
            let back = flow_between(&p, &fp, &r.end, 1.0, 0.0, &opts).unwrap();
            let err = back.end.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 10.0 * opts.tol, "reversal {err}");
        }
    }

    #[test]
    fn fixed_step_agrees_with_adaptive() {
        let tau = 20.0;
        let p = line_perturbed(tau, 0.05);
        let fp = FamilyParams::rescaled(tau, 0.0);
        let pts = probe_loop(&[0.5], 5);
        let fixed = flow_points_fixed(&p, &fp, &pts, 1.0, 8).unwrap();
        for (a, b) in pts.iter().zip(&fixed) {
            let r = flow_map(&p, &fp, a, 1.0, &FlowOptions::default()).unwrap();
            assert!((r.end[1] - b[1]).abs() < 1e-8);
            assert!((r.end[0] - b[0]).abs() < 1e-8);
        }
    }
}
