//! Toric data: weighted fans, the polytopes `Δ_τ = τΔ`, and the log-barrier
//! potentials `ρ_τ(x) = ρ(x/τ) = −Σ_m log(q_m)²` with `q_m = w_m + ⟨m,x⟩/τ`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Highest derivative order available from [`ToricPotential::rho_jet`].
pub const MAX_JET_ORDER: usize = 5;

const BOUNDARY_Q: f64 = -1e-12;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Rays `m ∈ Σ(1)` with weights `w_m`, cutting out `Δ = {⟨m,x⟩ + w_m ≤ 0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedFan {
    dim: usize,
    rays: Vec<Vec<i64>>,
    weights: Vec<f64>,
}

impl WeightedFan {
    pub fn new(dim: usize, rays: Vec<Vec<i64>>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidFan(format!("dimension {dim} outside 1..=3")));
        }
        if rays.len() != weights.len() {
            return Err(Error::InvalidFan(format!(
                "{} rays but {} weights",
                rays.len(),
                weights.len()
            )));
        }
        if rays.len() < dim + 1 {
            return Err(Error::InvalidFan(format!(
                "need at least {} rays, got {}",
                dim + 1,
                rays.len()
            )));
        }
        for (i, m) in rays.iter().enumerate() {
            if m.len() != dim {
                return Err(Error::InvalidFan(format!("ray {i} has length {}", m.len())));
            }
            let g = m.iter().fold(0, |acc, &v| gcd(acc, v));
            if g == 0 {
                return Err(Error::InvalidFan(format!("ray {i} is zero")));
            }
            if g != 1 {
                return Err(Error::InvalidFan(format!("ray {i} {m:?} is not primitive")));
            }
            if !weights[i].is_finite() {
                return Err(Error::InvalidFan(format!("weight {i} is not finite")));
            }
        }
        Ok(WeightedFan { dim, rays, weights })
    }

    /// Rays `±e_j` with all weights −1: the cube `[−1,1]^n`.
    pub fn cube(dim: usize) -> Self {
        let mut rays = Vec::new();
        for j in 0..dim {
            for s in [1, -1] {
                let mut m = vec![0; dim];
                m[j] = s;
                rays.push(m);
            }
        }
        let weights = vec![-1.0; rays.len()];
        WeightedFan::new(dim, rays, weights).expect("cube fan is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rays(&self) -> &[Vec<i64>] {
        &self.rays
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fan describing the same region in coordinates `x' = x − shift`.
    pub fn translated(&self, shift: &[f64]) -> WeightedFan {
        let weights = self
            .rays
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w + dot_i(m, shift))
            .collect();
        WeightedFan { dim: self.dim, rays: self.rays.clone(), weights }
    }
}

fn dot_i(m: &[i64], x: &[f64]) -> f64 {
    m.iter().zip(x).map(|(&a, b)| a as f64 * b).sum()
}

/// `q_m(x) = w_m + ⟨m,x⟩/τ`.
pub fn q_value(m: &[i64], w: f64, x: &[f64], tau: f64) -> f64 {
    w + dot_i(m, x) / tau
}

/// Certified description of `Δ_τ`.
#[derive(Debug, Clone, Serialize)]
pub struct Polytope {
    pub fan: WeightedFan,
    pub tau: f64,
    /// Vertices of the unscaled Δ.
    pub vertices: Vec<Vec<f64>>,
    /// Per-axis support interval `[min, max]` of Δ_τ.
    pub bounds: Vec<(f64, f64)>,
}

impl Polytope {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.max_q(x, 1.0) < 0.0
    }

    /// `max_m q_m` at scale `c·τ`; nonpositive exactly on Δ_{cτ}.
    pub fn max_q(&self, x: &[f64], c: f64) -> f64 {
        self.fan
            .rays
            .iter()
            .zip(&self.fan.weights)
            .map(|(m, &w)| q_value(m, w, x, c * self.tau))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn in_region(&self, x: &[f64], c: f64) -> bool {
        in_region(self, x, c)
    }

    /// Tensor lattice with `per_axis` points over the bounding box of Δ_{cτ},
    /// filtered to the points strictly inside Δ_{cτ}.
    pub fn sample_region(&self, c: f64, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.bounds.len();
        let total = per_axis.pow(n as u32);
        let mut out = Vec::new();
        for mut flat in 0..total {
            let mut x = vec![0.0; n];
            for (a, xa) in x.iter_mut().enumerate().rev() {
                let i = flat % per_axis;
                flat /= per_axis;
                let (lo, hi) = self.bounds[a];
                let u = (i as f64 + 0.5) / per_axis as f64;
                *xa = c * (lo + u * (hi - lo));
            }
            if self.max_q(&x, c) < 0.0 {
                out.push(x);
            }
        }
        out
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn ray_matrix(fan: &WeightedFan, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), fan.dim, |r, c| fan.rays[rows[r]][c] as f64)
}

fn null_vector(a: &DMatrix<f64>, n: usize) -> Option<DVector<f64>> {
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues[order[0]] > 1e-12 * scale {
        return None;
    }
    if n > 1 && eig.eigenvalues[order[1]] < 1e-12 * scale {
        return None; // null space of dimension ≥ 2
    }
    Some(eig.eigenvectors.column(order[0]).into_owned())
}

/// Returns a nonzero direction `d` with `⟨m,d⟩ ≤ 0` for all rays, if one exists.
fn recession_direction(fan: &WeightedFan) -> Option<Vec<f64>> {
    let n = fan.dim;
    let all: Vec<usize> = (0..fan.rays.len()).collect();
    let full = ray_matrix(fan, &all);
    if full.rank(1e-10) < n {
        // lineality: some direction is orthogonal to every ray
        let eig = (full.transpose() * &full).symmetric_eigen();
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        return Some(eig.eigenvectors.column(imin).iter().copied().collect());
    }
    let feasible = |d: &DVector<f64>| {
        fan.rays.iter().all(|m| {
            let v: f64 = m.iter().zip(d.iter()).map(|(&a, b)| a as f64 * b).sum();
            v <= 1e-12
        })
    };
    // A pointed nonzero cone has an extreme ray with n−1 independent active constraints.
    for subset in subsets(fan.rays.len(), n - 1) {
        let d = if n == 1 {
            DVector::from_element(1, 1.0)
        } else {
            match null_vector(&ray_matrix(fan, &subset), n) {
                Some(d) => d,
                None => continue,
            }
        };
        for cand in [d.clone(), -d] {
            if feasible(&cand) {
                return Some(cand.iter().copied().collect());
            }
        }
    }
    None
}

/// Builds `Δ_τ`, certifying boundedness and a nonempty interior.
pub fn build_polytope(fan: &WeightedFan, tau: f64) -> Result<Polytope> {
    if !(tau > 0.0) {
        return Err(Error::InvalidFan(format!("tau must be positive, got {tau}")));
    }
    if let Some(d) = recession_direction(fan) {
        return Err(Error::UnboundedPolytope(d));
    }
    let n = fan.dim;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for subset in subsets(fan.rays.len(), n) {
        let a = ray_matrix(fan, &subset);
        let b = DVector::from_iterator(n, subset.iter().map(|&i| -fan.weights[i]));
        let Some(lu) = a.clone().lu().solve(&b) else { continue };
        if a.rank(1e-10) < n {
            continue;
        }
        let x: Vec<f64> = lu.iter().copied().collect();
        let ok = fan
            .rays
            .iter()
            .zip(&fan.weights)
            .all(|(m, &w)| dot_i(m, &x) + w <= 1e-9);
        if ok && !vertices.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9)) {
            vertices.push(x);
        }
    }
    if vertices.len() < n + 1 {
        return Err(Error::EmptyInterior);
    }
    let mut centroid = vec![0.0; n];
    for v in &vertices {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x / vertices.len() as f64;
        }
    }
    let slack = fan
        .rays
        .iter()
        .zip(&fan.weights)
        .map(|(m, &w)| dot_i(m, &centroid) + w)
        .fold(f64::NEG_INFINITY, f64::max);
    if slack > -1e-9 {
        return Err(Error::EmptyInterior);
    }
    let bounds = (0..n)
        .map(|j| {
            let lo = vertices.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
            let hi = vertices.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max);
            (lo * tau, hi * tau)
        })
        .collect();
    Ok(Polytope { fan: fan.clone(), tau, vertices, bounds })
}

/// True iff every q-value of `x` at scale `c·τ` is ≤ 0.
pub fn in_region(poly: &Polytope, x: &[f64], c: f64) -> bool {
    poly.max_q(x, c) <= 0.0
}

/// Value and symmetric derivative tensors (flattened row-major, `n^k` entries
/// for order k) of a toric potential at a point.
#[derive(Debug, Clone)]
pub struct RhoJet {
    pub dim: usize,
    /// `tensors[k]` is the k-th derivative tensor; `tensors[0]` holds the value.
    pub tensors: Vec<Vec<f64>>,
}

impl RhoJet {
    pub fn order(&self) -> usize {
        self.tensors.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.tensors[0][0]
    }

    pub fn grad(&self) -> &[f64] {
        &self.tensors[1]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.tensors[2][i * self.dim + j]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.hess(i, j))
    }

    /// Entry of the k-th tensor at the index sequence `idx`.
    pub fn entry(&self, idx: &[usize]) -> f64 {
        let k = idx.len();
        let mut flat = 0;
        for &i in idx {
            flat = flat * self.dim + i;
        }
        self.tensors[k][flat]
    }

    /// Mixed partial for a multi-index given as exponents per coordinate.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let mut idx = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                idx.push(i);
            }
        }
        if idx.len() > self.order() {
            return f64::NAN;
        }
        self.entry(&idx)
    }
}

fn tensor_len(n: usize, k: usize) -> usize {
    n.pow(k as u32)
}

fn index_seq(mut flat: usize, n: usize, k: usize) -> Vec<usize> {
    let mut idx = vec![0; k];
    for slot in (0..k).rev() {
        idx[slot] = flat % n;
        flat /= n;
    }
    idx
}

/// A convex potential of the log-moment coordinates x defining a toric Kähler metric.
pub trait ToricPotential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn tau(&self) -> f64;
    fn rho_jet(&self, x: &[f64], order: usize) -> Result<RhoJet>;
    /// `max_m q_m` at scale `c·τ`, or `None` when the domain has no boundary.
    fn region_q(&self, x: &[f64], c: f64) -> Option<f64>;

    fn in_region(&self, x: &[f64], c: f64) -> bool {
        self.region_q(x, c).is_none_or(|q| q <= 0.0)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.region_q(x, 1.0).is_none_or(|q| q < BOUNDARY_Q)
    }

    /// Distance in x from `x` to the boundary of Δ_τ along coordinate axes (∞ if unbounded).
    fn boundary_distance(&self, x: &[f64]) -> f64;
}

/// `ρ_τ(x) = −Σ_m log(w_m + ⟨m,x⟩/τ)²`, stored without additive constant.
#[derive(Debug, Clone)]
pub struct FanPotential {
    pub fan: WeightedFan,
    pub tau: f64,
}

impl FanPotential {
    pub fn new(fan: WeightedFan, tau: f64) -> Self {
        FanPotential { fan, tau }
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        self.fan
            .rays
            .iter()
            .zip(&self.fan.weights)
            .map(|(m, &w)| q_value(m, w, x, self.tau))
            .collect()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl ToricPotential for FanPotential {
    fn dim(&self) -> usize {
        self.fan.dim
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn rho_jet(&self, x: &[f64], order: usize) -> Result<RhoJet> {
        let n = self.fan.dim;
        let order = order.min(MAX_JET_ORDER);
        let qs = self.q_values(x);
        let qmax = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if qmax >= BOUNDARY_Q {
            return Err(Error::BoundaryEvaluation(qmax));
        }
        let mut tensors: Vec<Vec<f64>> =
            (0..=order).map(|k| vec![0.0; tensor_len(n, k)]).collect();
        for (m, &q) in self.fan.rays.iter().zip(&qs) {
            tensors[0][0] -= (q * q).ln();
            let mt: Vec<f64> = m.iter().map(|&v| v as f64 / self.tau).collect();
            for (k, tensor) in tensors.iter_mut().enumerate().skip(1) {
                // ∂^k (−2 log|q|) = −2 (−1)^{k+1} (k−1)! m^{⊗k} / (τ q)^k
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let coef = -2.0 * sign * factorial(k - 1) / q.powi(k as i32);
                for (flat, slot) in tensor.iter_mut().enumerate() {
                    let idx = index_seq(flat, n, k);
                    let prod: f64 = idx.iter().map(|&i| mt[i]).product();
                    *slot += coef * prod;
                }
            }
        }
        Ok(RhoJet { dim: n, tensors })
    }

    fn region_q(&self, x: &[f64], c: f64) -> Option<f64> {
        Some(
            self.fan
                .rays
                .iter()
                .zip(&self.fan.weights)
                .map(|(m, &w)| q_value(m, w, x, c * self.tau))
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        // distance to each facet hyperplane ⟨m,x⟩ + τ w_m = 0
        self.fan
            .rays
            .iter()
            .zip(&self.fan.weights)
            .map(|(m, &w)| {
                let norm = m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
                -(dot_i(m, x) + self.tau * w) / norm
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// The flat model `ρ = Σ exp(x_j)` (the Euclidean metric on (C*)^n).
#[derive(Debug, Clone)]
pub struct FlatPotential {
    pub dim: usize,
}

impl ToricPotential for FlatPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tau(&self) -> f64 {
        1.0
    }

    fn rho_jet(&self, x: &[f64], order: usize) -> Result<RhoJet> {
        let n = self.dim;
        let order = order.min(MAX_JET_ORDER);
        let mut tensors: Vec<Vec<f64>> =
            (0..=order).map(|k| vec![0.0; tensor_len(n, k)]).collect();
        tensors[0][0] = x.iter().map(|v| v.exp()).sum();
        for (k, tensor) in tensors.iter_mut().enumerate().skip(1) {
            for (j, xj) in x.iter().enumerate() {
                let idx = vec![j; k];
                let mut flat = 0;
                for &i in &idx {
                    flat = flat * n + i;
                }
                tensor[flat] = xj.exp();
            }
        }
        Ok(RhoJet { dim: n, tensors })
    }

    fn region_q(&self, _x: &[f64], _c: f64) -> Option<f64> {
        None
    }

    fn boundary_distance(&self, _x: &[f64]) -> f64 {
        f64::INFINITY
    }
}

/// Translates the fan so the critical point of ρ sits at the origin.
///
/// Returns the translated fan and the shift `x_c` (old coordinates of the new origin).
pub fn recenter(fan: &WeightedFan) -> Result<(WeightedFan, Vec<f64>)> {
    let poly = build_polytope(fan, 1.0)?;
    let n = fan.dim;
    let mut x = vec![0.0; n];
    for v in &poly.vertices {
        for (c, p) in x.iter_mut().zip(v) {
            *c += p / poly.vertices.len() as f64;
        }
    }
    let pot = FanPotential::new(fan.clone(), 1.0);
    for _ in 0..100 {
        let jet = pot.rho_jet(&x, 2)?;
        let g = DVector::from_column_slice(jet.grad());
        if g.norm() < 1e-13 {
            return Ok((fan.translated(&x), x));
        }
        let h = jet.hessian();
        let step = h
            .cholesky()
            .ok_or_else(|| Error::NoConvergence("Hessian of ρ not positive definite".into()))?
            .solve(&g);
        let f0 = jet.value();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            if pot.in_domain(&trial) {
                let f1 = pot.rho_jet(&trial, 0)?.value();
                if f1 <= f0 - 1e-4 * t * g.dot(&step) || t < 1e-12 {
                    x = trial;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-14 {
                return Err(Error::NoConvergence("line search failed in recentering".into()));
            }
        }
    }
    let g = pot.rho_jet(&x, 1)?;
    let gn = g.grad().iter().map(|v| v * v).sum::<f64>().sqrt();
    if gn < 1e-10 {
        Ok((fan.translated(&x), x))
    } else {
        Err(Error::NoConvergence(format!("|∇ρ| = {gn:e} after 100 Newton steps")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line_fan() -> WeightedFan {
        WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-1.0, -1.0]).unwrap()
    }

    #[test]
    fn interval_polytope() {
        let p = build_polytope(&line_fan(), 1.0).unwrap();
        assert_eq!(p.bounds, vec![(-1.0, 1.0)]);
    }

    #[test]
    fn half_line_is_unbounded() {
        // n+1 rays required, so use a duplicate-direction pair to get past validation
        let fan = WeightedFan::new(1, vec![vec![1], vec![1]], vec![-1.0, -2.0]).unwrap();
        assert!(matches!(build_polytope(&fan, 1.0), Err(Error::UnboundedPolytope(_))));
        let single = WeightedFan::new(1, vec![vec![1]], vec![-1.0]);
        assert!(single.is_err());
    }

    #[test]
    fn square_polytope_scales_with_tau() {
        let p = build_polytope(&WeightedFan::cube(2), 2.0).unwrap();
        assert_eq!(p.bounds, vec![(-2.0, 2.0), (-2.0, 2.0)]);
        assert!(!p.in_region(&[0.9, 1.1], 0.5));
        assert!(p.in_region(&[0.9, 0.9], 0.5));
    }

    #[test]
    fn empty_interior_is_rejected() {
        let fan = WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-1.0, 1.0]).unwrap();
        assert_eq!(build_polytope(&fan, 1.0).unwrap_err(), Error::EmptyInterior);
        let fan = WeightedFan::new(1, vec![vec![1], vec![-1]], vec![1.0, 1.0]).unwrap();
        assert_eq!(build_polytope(&fan, 1.0).unwrap_err(), Error::EmptyInterior);
    }

    #[test]
    fn non_primitive_ray_rejected() {
        let err = WeightedFan::new(1, vec![vec![2], vec![-1]], vec![-1.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidFan(_)));
    }

    #[test]
    fn unbounded_plane_wedge() {
        let fan = WeightedFan::new(2, vec![vec![1, 0], vec![0, 1], vec![1, 1]], vec![-1.0; 3])
            .unwrap();
        assert!(matches!(build_polytope(&fan, 1.0), Err(Error::UnboundedPolytope(_))));
        let tri =
            WeightedFan::new(2, vec![vec![1, 0], vec![0, 1], vec![-1, -1]], vec![-1.0; 3]).unwrap();
        let p = build_polytope(&tri, 1.0).unwrap();
        assert_eq!(p.vertices.len(), 3);
    }

    #[test]
    fn q_values() {
        let fan = line_fan();
        assert_eq!(q_value(&fan.rays()[0], -1.0, &[0.0], 10.0), -1.0);
        assert_relative_eq!(q_value(&fan.rays()[0], -1.0, &[5.0], 10.0), -0.5);
        assert_eq!(q_value(&fan.rays()[0], -1.0, &[10.0], 10.0), 0.0);
    }

    #[test]
    fn rho_jet_line_model() {
        let pot = FanPotential::new(line_fan(), 1.0);
        let j = pot.rho_jet(&[0.0], 5).unwrap();
        assert_eq!(j.value(), 0.0);
        assert_eq!(j.grad()[0], 0.0);
        assert_relative_eq!(j.hess(0, 0), 4.0, epsilon = 1e-14);
        assert_relative_eq!(j.entry(&[0, 0, 0, 0]), 24.0, epsilon = 1e-12);
        let half = pot.rho_jet(&[0.5], 0).unwrap().value();
        assert_relative_eq!(half, -2.0 * (0.75f64).ln(), epsilon = 1e-14);
        assert_relative_eq!(half, 0.575_364_144_903_562, epsilon = 1e-12);
        assert!(matches!(pot.rho_jet(&[1.0], 2), Err(Error::BoundaryEvaluation(_))));
    }

    #[test]
    fn recenter_shifts_asymmetric_interval() {
        let fan = WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-3.0, 1.0]).unwrap();
        let (centered, shift) = recenter(&fan).unwrap();
        assert_relative_eq!(shift[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(centered.weights()[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(centered.weights()[1], -1.0, epsilon = 1e-12);
        let (same, s0) = recenter(&line_fan()).unwrap();
        assert_eq!(s0, vec![0.0]);
        assert_eq!(same, line_fan());
    }

    #[test]
    fn blow_up_near_boundary() {
        let pot = FanPotential::new(line_fan(), 1.0);
        let r0 = pot.rho_jet(&[0.0], 0).unwrap().value();
        let near = pot.rho_jet(&[1.0 - 1e-3], 0).unwrap().value();
        assert!(near > r0 + 10.0);
    }
}
