//! Fourier collocation on the torus `[0, 2π)^n` with `2N+1` points per axis.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Uniform tensor grid on `T^n` with truncation `N` (|k_j| ≤ N) per axis.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    modes: usize,
    m: usize,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("modes", &self.modes)
            .finish()
    }
}

impl TorusGrid {
    pub fn new(dim: usize, modes: usize) -> Self {
        assert!(dim >= 1 && modes >= 1);
        let m = 2 * modes + 1;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        TorusGrid { dim, modes, m, len: m.pow(dim as u32), fwd, inv }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Per-axis grid indices of flat index `idx` (axis 0 slowest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.m;
            idx /= self.m;
        }
        out
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = 2.0 * std::f64::consts::PI / self.m as f64;
        self.multi_index(idx).into_iter().map(|i| i as f64 * h).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    /// Signed wavenumber for FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.modes {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Quadrature weight per point so that Σ w f ≈ ∫_{T^n} f dt.
    pub fn cell_volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI / self.m as f64).powi(self.dim as i32)
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len).map(|i| f(&self.point(i))).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.dim - 1 - axis) as u32)
    }

    fn fft_axis(&self, buf: &mut [Complex64], axis: usize, inverse: bool) {
        let stride = self.stride(axis);
        let block = stride * self.m;
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut line = vec![Complex64::new(0.0, 0.0); self.m];
        for outer in (0..self.len).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + k * stride];
                }
                plan.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    buf[base + k * stride] = *v;
                }
            }
        }
    }

    /// Full n-D forward transform, normalized so coefficients are Fourier amplitudes.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for a in 0..self.dim {
            self.fft_axis(&mut buf, a, false);
        }
        let s = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        for a in 0..self.dim {
            self.fft_axis(&mut buf, a, true);
        }
        buf.iter().map(|v| v.re).collect()
    }

    /// Multiplies the spectrum by `symbol(k)` and transforms back.
    pub fn apply_symbol(&self, f: &[f64], symbol: impl Fn(&[i64]) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(f);
        for (i, v) in spec.iter_mut().enumerate() {
            let k: Vec<i64> = self.multi_index(i).into_iter().map(|b| self.wavenumber(b)).collect();
            *v *= symbol(&k);
        }
        self.inverse(&spec)
    }

    /// Spectral derivative `∂f/∂t_axis`.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_axis(&mut buf, axis, false);
        let stride = self.stride(axis);
        let s = 1.0 / self.m as f64;
        for (i, v) in buf.iter_mut().enumerate() {
            let bin = (i / stride) % self.m;
            let k = self.wavenumber(bin) as f64;
            *v *= Complex64::new(0.0, k * s);
        }
        self.fft_axis(&mut buf, axis, true);
        buf.iter().map(|v| v.re).collect()
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dim).map(|a| self.derivative(f, a)).collect()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / self.len as f64
    }

    pub fn remove_mean(&self, f: &mut [f64]) {
        let m = self.mean(f);
        f.iter_mut().for_each(|v| *v -= m);
    }

    /// Band-limited interpolation of `f` onto `target` (any truncation).
    pub fn resample(&self, f: &[f64], target: &TorusGrid) -> Vec<f64> {
        assert_eq!(self.dim, target.dim);
        let spec = self.forward(f);
        let mut out = vec![Complex64::new(0.0, 0.0); target.len];
        for (i, v) in spec.iter().enumerate() {
            let k: Vec<i64> = self.multi_index(i).into_iter().map(|b| self.wavenumber(b)).collect();
            if k.iter().any(|&kk| kk.unsigned_abs() as usize > target.modes) {
                continue;
            }
            let mut flat = 0;
            for &kk in &k {
                let bin = if kk >= 0 { kk as usize } else { (kk + target.m as i64) as usize };
                flat = flat * target.m + bin;
            }
            out[flat] = *v;
        }
        target.inverse(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivative_of_trig_polynomial() {
        let g = TorusGrid::new(2, 8);
        let f = g.sample(|t| (3.0 * t[0]).cos() * (2.0 * t[1]).sin() + t[1].cos());
        let d0 = g.derivative(&f, 0);
        let d1 = g.derivative(&f, 1);
        for i in 0..g.len() {
            let t = g.point(i);
            assert_relative_eq!(d0[i], -3.0 * (3.0 * t[0]).sin() * (2.0 * t[1]).sin(), epsilon = 1e-12);
            assert_relative_eq!(
                d1[i],
                2.0 * (3.0 * t[0]).cos() * (2.0 * t[1]).cos() - t[1].sin(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn resample_is_exact_for_band_limited() {
        let g = TorusGrid::new(1, 4);
        let fine = TorusGrid::new(1, 9);
        let f = g.sample(|t| (4.0 * t[0]).sin() + 0.5);
        let r = g.resample(&f, &fine);
        for i in 0..fine.len() {
            let t = fine.point(i);
            assert_relative_eq!(r[i], (4.0 * t[0]).sin() + 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn inverse_laplacian_symbol() {
        let g = TorusGrid::new(1, 6);
        let f = g.sample(|t| (2.0 * t[0]).cos());
        let u = g.apply_symbol(&f, |k| {
            let k2 = (k[0] * k[0]) as f64;
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / k2, 0.0)
            }
        });
        for i in 0..g.len() {
            assert_relative_eq!(u[i], (2.0 * g.point(i)[0]).cos() / 4.0, epsilon = 1e-14);
        }
    }
}
