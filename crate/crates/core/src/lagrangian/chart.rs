//! Action-angle charts around a toric fibre and graph tori `L(h)`.
//!
//! With `ρ̂⁰ = scale·(ρ_τ + f⁰)` and `t = θ/2`, the coordinates
//! `y = ∇ρ̂⁰(x) − ∇ρ̂⁰(x*)` satisfy `ω̂⁰ = Σ dy_j ∧ dt_j`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet;
use crate::kahler::{metric_jet, FamilyParams, KahlerPotential};
use crate::spectral::TorusGrid;

const NEWTON_TOL: f64 = 1e-12;

/// Darboux chart `(y, t)` around the fibre over `x*`.
#[derive(Debug, Clone)]
pub struct FiberChart {
    pub potential: KahlerPotential,
    pub family: FamilyParams,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub hess_star: DMatrix<f64>,
    pub radius: f64,
    /// Largest deviation from the standard form found at the probe points.
    pub darboux_defect: f64,
}

impl FiberChart {
    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// `(∇ρ̂⁰(x), Hess ρ̂⁰(x))`.
    pub fn grad_hess(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        grad_hess(&self.potential, &self.family, x)
    }

    pub fn y_of_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (g, _) = self.grad_hess(x)?;
        Ok(g.iter().zip(&self.y_star).map(|(a, b)| a - b).collect())
    }

    /// Inverts `y ↦ x` by damped Newton on the convex function `ρ̂⁰(x) − ⟨y + y*, x⟩`.
    pub fn x_of_y(&self, y: &[f64], x_init: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.dim();
        let target = DVector::from_iterator(n, y.iter().zip(&self.y_star).map(|(a, b)| a + b));
        let tol = NEWTON_TOL * target.amax().max(1.0);
        let mut x = match x_init {
            Some(x0) => DVector::from_column_slice(x0),
            None => {
                let dy = DVector::from_column_slice(y);
                let step = self.hess_star.clone().lu().solve(&dy).unwrap_or(dy);
                DVector::from_column_slice(&self.x_star) + step
            }
        };
        let toric = self.potential.toric_part();
        if !toric.in_domain(x.as_slice()) {
            x = DVector::from_column_slice(&self.x_star);
        }
        for _ in 0..80 {
            let (g, h) = self.grad_hess(x.as_slice())?;
            let r = &target - &g;
            if r.amax() < tol {
                return Ok(x.as_slice().to_vec());
            }
            let dx = h.lu().solve(&r).ok_or_else(|| Error::OutOfChart("singular Hessian".into()))?;
            let mut lam = 1.0;
            loop {
                let trial = &x + &dx * lam;
                if toric.in_domain(trial.as_slice()) {
                    if let Ok((g2, _)) = self.grad_hess(trial.as_slice()) {
                        if (&target - &g2).norm() < r.norm() || lam < 1e-3 {
                            x = trial;
                            break;
                        }
                    }
                }
                lam *= 0.5;
                if lam < 1e-8 {
                    return Err(Error::OutOfChart(format!("Newton line search failed at y = {y:?}")));
                }
            }
        }
        Err(Error::OutOfChart(format!("Newton did not converge at y = {y:?}")))
    }
}

fn grad_hess(p: &KahlerPotential, fp: &FamilyParams, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = p.dim();
    let sp = jet::space(2 * n, 2);
    let theta = vec![0.0; n];
    let pj = p.potential_jet(sp, x, &theta, &fp.at(0.0))?;
    let g = DVector::from_iterator(n, (0..n).map(|i| pj.d1(i)));
    let h = DMatrix::from_fn(n, n, |i, j| pj.d2(i, j));
    Ok((g, h))
}

/// Builds the chart at `x*` for the `s = 0` member of the family `fp`.
pub fn make_chart(p: &KahlerPotential, fp: &FamilyParams, x_star: &[f64]) -> Result<FiberChart> {
    let n = p.dim();
    if x_star.len() != n {
        return Err(Error::Dimension(format!("base point has {} coordinates, expected {n}", x_star.len())));
    }
    let (g, h) = grad_hess(p, fp, x_star)?;
    let eig = h.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v.abs())));
    if !(lo > 0.0) || hi / lo > 1e8 {
        return Err(Error::ChartDegenerate(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    let mut chart = FiberChart {
        potential: p.clone(),
        family: *fp,
        x_star: x_star.to_vec(),
        y_star: g.as_slice().to_vec(),
        hess_star: h,
        radius: 0.0,
        darboux_defect: 0.0,
    };
    let dist = p.toric_part().boundary_distance(x_star);
    let reach = if dist.is_finite() { 0.5 * dist } else { 1.0 };
    let mut radius = f64::INFINITY;
    for j in 0..n {
        for sign in [-1.0, 1.0] {
            let mut x = x_star.to_vec();
            x[j] += sign * reach;
            let y = chart.y_of_x(&x)?;
            radius = radius.min(y.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    chart.radius = radius;
    chart.darboux_defect = darboux_defect(&chart, reach)?;
    if chart.darboux_defect > 1e-9 * chart.hess_star.amax().max(1.0) {
        return Err(Error::ChartDegenerate(chart.darboux_defect));
    }
    Ok(chart)
}

/// Compares `ω̂⁰` with the pullback of `Σ dy∧dt` at ten probe points.
fn darboux_defect(chart: &FiberChart, reach: f64) -> Result<f64> {
    let n = chart.dim();
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let x: Vec<f64> = (0..n)
            .map(|j| chart.x_star[j] + 0.3 * reach * ((k * (j + 2)) as f64 * 0.9 + 0.4).sin())
            .collect();
        let theta: Vec<f64> = (0..n).map(|j| 1.3 * k as f64 + 0.5 * j as f64).collect();
        let (_, hx) = chart.grad_hess(&x)?;
        let mj = metric_jet(&chart.potential, &x, &theta, 0, &chart.family.at(0.0))?;
        let omega = mj.kahler_form();
        let mut std = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                std[(i, n + j)] = 0.5 * hx[(i, j)];
                std[(n + j, i)] = -0.5 * hx[(i, j)];
            }
        }
        worst = worst.max((omega - std).amax());
    }
    Ok(worst)
}

/// Points of an immersed torus sampled on a grid: `pts[p] = (x, θ)` with
/// `θ = 2t + (periodic part)`.
#[derive(Debug, Clone)]
pub struct Immersion {
    pub grid: TorusGrid,
    pub pts: Vec<Vec<f64>>,
}

impl Immersion {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Periodic coordinate functions: `x_a` and `θ_a − 2t_a`.
    pub fn periodic_components(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let ts = self.grid.points();
        (0..2 * n)
            .map(|a| {
                self.pts
                    .iter()
                    .zip(&ts)
                    .map(|(p, t)| if a < n { p[a] } else { p[a] - 2.0 * t[a - n] })
                    .collect()
            })
            .collect()
    }

    /// Tangent frames `e_j = ∂X/∂t_j` (columns) and second derivatives
    /// `∂_i∂_j X` (`second[p][i*n+j]`).
    pub fn derivatives(&self) -> (Vec<DMatrix<f64>>, Vec<Vec<Vec<f64>>>) {
        let n = self.dim();
        let len = self.grid.len();
        let comps = self.periodic_components();
        let first: Vec<Vec<Vec<f64>>> =
            comps.iter().map(|c| (0..n).map(|j| self.grid.derivative(c, j)).collect()).collect();
        let mut frames = vec![DMatrix::zeros(2 * n, n); len];
        let mut second = vec![vec![vec![0.0; 2 * n]; n * n]; len];
        for a in 0..2 * n {
            for j in 0..n {
                for p in 0..len {
                    frames[p][(a, j)] = first[a][j][p] + if a == n + j { 2.0 } else { 0.0 };
                }
                for i in 0..=j {
                    let d = self.grid.derivative(&first[a][j], i);
                    for p in 0..len {
                        second[p][i * n + j][a] = d[p];
                        second[p][j * n + i][a] = d[p];
                    }
                }
            }
        }
        (frames, second)
    }
}

/// The graph `y = ∇_t h(t)` over the fibre of a chart. `h` is stored as grid
/// values with zero uniform mean.
#[derive(Debug, Clone)]
pub struct GraphTorus {
    pub chart: Arc<FiberChart>,
    pub grid: TorusGrid,
    pub h: Vec<f64>,
}

impl GraphTorus {
    pub fn new(chart: Arc<FiberChart>, grid: TorusGrid, mut h: Vec<f64>) -> Self {
        grid.remove_mean(&mut h);
        GraphTorus { chart, grid, h }
    }

    pub fn zero(chart: Arc<FiberChart>, grid: TorusGrid) -> Self {
        let h = vec![0.0; grid.len()];
        GraphTorus { chart, grid, h }
    }
}

/// Solves `∇ρ̂⁰(x) = ∇h(t) + ∇ρ̂⁰(x*)` at every grid point.
pub fn embed(l: &GraphTorus) -> Result<Immersion> {
    let n = l.grid.dim();
    let dh = l.grid.gradient(&l.h);
    let ts = l.grid.points();
    let chart = &l.chart;
    let idx: Vec<usize> = (0..l.grid.len()).collect();
    let pts = crate::par::map_result(&idx, |&p| {
        let y: Vec<f64> = (0..n).map(|j| dh[j][p]).collect();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny >= chart.radius {
            return Err(Error::OutOfChart(format!("|dh| = {ny:.3e} exceeds chart radius {:.3e}", chart.radius)));
        }
        let mut pt = chart.x_of_y(&y, None)?;
        pt.extend(ts[p].iter().map(|t| 2.0 * t));
        Ok(pt)
    })?;
    Ok(Immersion { grid: l.grid.clone(), pts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toric::{FanPotential, FlatPotential, WeightedFan};
    use approx::assert_relative_eq;

    #[test]
    fn flat_chart_is_exponential() {
        let p = KahlerPotential::toric(Arc::new(FlatPotential { dim: 2 }));
        let fp = FamilyParams::rescaled(1.0, 0.0);
        let chart = make_chart(&p, &fp, &[0.2, -0.4]).unwrap();
        let y = chart.y_of_x(&[0.5, 0.1]).unwrap();
        assert_relative_eq!(y[0], 0.5f64.exp() - 0.2f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(y[1], 0.1f64.exp() - (-0.4f64).exp(), epsilon = 1e-14);
        assert!(chart.y_of_x(&[0.2, -0.4]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn line_chart_matches_closed_form() {
        let fan = WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-1.0, -1.0]).unwrap();
        let p = KahlerPotential::toric(Arc::new(FanPotential::new(fan, 1.0)));
        let chart = make_chart(&p, &FamilyParams::rescaled(1.0, 0.0), &[0.0]).unwrap();
        for x in [-0.6, 0.1, 0.45] {
            assert_relative_eq!(chart.y_of_x(&[x]).unwrap()[0], 4.0 * x / (1.0 - x * x), epsilon = 1e-13);
            let back = chart.x_of_y(&[4.0 * x / (1.0 - x * x)], None).unwrap();
            assert_relative_eq!(back[0], x, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_graph_embedding_closed_form() {
        let p = KahlerPotential::toric(Arc::new(FlatPotential { dim: 1 }));
        let chart = Arc::new(make_chart(&p, &FamilyParams::rescaled(1.0, 0.0), &[0.3]).unwrap());
        let grid = TorusGrid::new(1, 8);
        let eps = 0.2;
        let h = grid.sample(|t| eps * t[0].cos());
        let imm = embed(&GraphTorus::new(chart, grid.clone(), h)).unwrap();
        for (pt, t) in imm.pts.iter().zip(grid.points()) {
            assert_relative_eq!(pt[0], (0.3f64.exp() - eps * t[0].sin()).ln(), epsilon = 1e-12);
            assert_relative_eq!(pt[1], 2.0 * t[0], epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_section_and_degenerate_chart() {
        let p = KahlerPotential::toric(Arc::new(FlatPotential { dim: 2 }));
        let fp = FamilyParams::rescaled(1.0, 0.0);
        let chart = Arc::new(make_chart(&p, &fp, &[0.0, 0.0]).unwrap());
        let imm = embed(&GraphTorus::zero(chart, TorusGrid::new(2, 3))).unwrap();
        assert!(imm.pts.iter().all(|q| q[0] == 0.0 && q[1] == 0.0));
        let err = make_chart(&p, &fp, &[0.0, 20.0]).unwrap_err();
        assert!(matches!(err, Error::ChartDegenerate(_)));
    }
}
