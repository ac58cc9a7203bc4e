//! Product tori `(r_1 e^{it_1}, …, r_n e^{it_n})` in `Cⁿ = R^{2n}`, computed
//! with plain Cartesian vectors.
//!
//! The potential `Σ exp(x_j)` with `z = exp((x + iθ)/2)` gives twice the
//! Euclidean metric, so the induced metric is `2 r_j² dt_j²`, `α = −Σ dt_j`
//! (the trace of `II` points inwards with length `1/(2r_j)` along each
//! circle, and `ω(−z_j/(2r_j²), i z_j) = −1`), and
//! `Vol = 2^{n/2} (2π)ⁿ Π r_j`.

use nalgebra::{DMatrix, DVector};

/// Ratio of the model metric to the Euclidean one.
pub const FLAT_METRIC_FACTOR: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct FlatTorus {
    pub metric: DMatrix<f64>,
    /// `a[(i*n + j)*n + k]`.
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
    pub volume: f64,
}

/// Geometry of the product torus with the given radii at angle `t`.
pub fn flat_torus_oracle(radii: &[f64], t: &[f64]) -> FlatTorus {
    let n = radii.len();
    let d = 2 * n;
    let c = FLAT_METRIC_FACTOR;
    // real coordinates (Re z_1, Im z_1, …)
    let mut e = DMatrix::zeros(d, n);
    let mut second = vec![DVector::zeros(d); n * n];
    for j in 0..n {
        let (s, co) = t[j].sin_cos();
        e[(2 * j, j)] = -radii[j] * s;
        e[(2 * j + 1, j)] = radii[j] * co;
        second[j * n + j][2 * j] = -radii[j] * co;
        second[j * n + j][2 * j + 1] = -radii[j] * s;
    }
    let metric = e.transpose() * &e * c;
    let g_inv = metric.clone().try_inverse().expect("radii must be positive");
    // ω(u, v) = c ⟨iu, v⟩
    let rot = |u: &DVector<f64>| {
        let mut v = DVector::zeros(d);
        for j in 0..n {
            v[2 * j] = -u[2 * j + 1];
            v[2 * j + 1] = u[2 * j];
        }
        v
    };
    let project = |u: &DVector<f64>| {
        let coeff = &g_inv * (e.transpose() * u * c);
        u - &e * coeff
    };
    let mut a = vec![0.0; n * n * n];
    for ij in 0..n * n {
        let nu = project(&second[ij]);
        let inu = rot(&nu);
        for k in 0..n {
            a[ij * n + k] = c * inu.dot(&e.column(k));
        }
    }
    let alpha = (0..n)
        .map(|k| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| g_inv[(i, j)] * a[(i * n + j) * n + k]).sum())
        .collect();
    let volume = metric.determinant().sqrt() * (2.0 * std::f64::consts::PI).powi(n as i32);
    FlatTorus { metric, a, alpha, volume }
}
