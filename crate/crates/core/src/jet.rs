//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a function
//! at a point for every multi-index with `|α| ≤ order`. Arithmetic is exact
//! up to truncation, so derivatives of composed expressions come out without
//! finite differences. All geometry in this crate is assembled from jets of
//! Kähler potentials.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

/// Monomial layout and multiplication tables for jets in `nvars` variables
/// truncated at total degree `order`.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monos: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    factorials: Vec<f64>,
    mul: Vec<(u32, u32, u32)>,
    deriv: Vec<Vec<(usize, usize, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.monos.len())
            .finish()
    }
}

fn enumerate(nvars: usize, degree: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == nvars - 1 {
        let used: usize = prefix.iter().map(|&v| v as usize).sum();
        let mut m = prefix.clone();
        m.push((degree - used) as u8);
        out.push(m);
        return;
    }
    let used: usize = prefix.iter().map(|&v| v as usize).sum();
    for e in (0..=(degree - used)).rev() {
        prefix.push(e as u8);
        enumerate(nvars, degree, prefix, out);
        prefix.pop();
    }
}

/// Shared, lazily built jet space for `(nvars, order)`; spaces are never freed.
pub fn space(nvars: usize, order: usize) -> &'static JetSpace {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static JetSpace>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    cache
        .entry((nvars, order))
        .or_insert_with(|| Box::leak(Box::new(JetSpace::new(nvars, order))))
}

impl JetSpace {
    pub fn new(nvars: usize, order: usize) -> Self {
        assert!(nvars >= 1, "jets need at least one variable");
        let mut monos = Vec::new();
        for deg in 0..=order {
            enumerate(nvars, deg, &mut Vec::new(), &mut monos);
        }
        let index: HashMap<Vec<u8>, usize> =
            monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut mul = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in monos.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        let mut deriv = vec![Vec::new(); nvars];
        for (var, table) in deriv.iter_mut().enumerate() {
            for (i, m) in monos.iter().enumerate() {
                if m[var] > 0 {
                    let mut lower = m.clone();
                    lower[var] -= 1;
                    table.push((i, index[&lower], m[var] as f64));
                }
            }
        }
        let mut factorials = vec![1.0; order.max(1) * nvars + 2];
        for k in 1..factorials.len() {
            factorials[k] = factorials[k - 1] * k as f64;
        }
        JetSpace { nvars, order, monos, index, factorials, mul, deriv }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monos
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    fn alpha_factorial(&self, alpha: &[u8]) -> f64 {
        alpha.iter().map(|&a| self.factorials[a as usize]).product()
    }

    pub fn zero(&self) -> Jet<'_> {
        Jet { sp: self, c: vec![0.0; self.len()] }
    }

    pub fn constant(&self, v: f64) -> Jet<'_> {
        let mut j = self.zero();
        j.c[0] = v;
        j
    }

    /// The coordinate function `x_i` expanded at a point whose i-th entry is `value`.
    pub fn variable(&self, i: usize, value: f64) -> Jet<'_> {
        let mut j = self.constant(value);
        if self.order >= 1 {
            let mut e = vec![0u8; self.nvars];
            e[i] = 1;
            j.c[self.index[&e]] = 1.0;
        }
        j
    }

    /// `v0 + Σ grad_i (x_i − p_i)`.
    pub fn affine(&self, v0: f64, grad: &[f64]) -> Jet<'_> {
        let mut j = self.constant(v0);
        if self.order >= 1 {
            for (i, g) in grad.iter().enumerate() {
                let mut e = vec![0u8; self.nvars];
                e[i] = 1;
                j.c[self.index[&e]] = *g;
            }
        }
        j
    }

    /// Builds a jet from a derivative oracle `alpha ↦ ∂^α f`.
    pub fn from_derivatives(&self, mut d: impl FnMut(&[u8]) -> f64) -> Jet<'_> {
        let mut j = self.zero();
        for (i, m) in self.monos.iter().enumerate() {
            j.c[i] = d(m) / self.alpha_factorial(m);
        }
        j
    }
}

/// A truncated Taylor expansion living in a [`JetSpace`].
#[derive(Clone)]
pub struct Jet<'s> {
    sp: &'s JetSpace,
    c: Vec<f64>,
}

impl fmt::Debug for Jet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet").field("coeffs", &self.c).finish()
    }
}

impl<'s> Jet<'s> {
    pub fn space(&self) -> &'s JetSpace {
        self.sp
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        match self.sp.index_of(alpha) {
            Some(i) => self.c[i] * self.sp.alpha_factorial(alpha),
            None => 0.0,
        }
    }

    pub fn d1(&self, i: usize) -> f64 {
        let mut a = vec![0u8; self.sp.nvars];
        a[i] += 1;
        self.partial(&a)
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut a = vec![0u8; self.sp.nvars];
        a[i] += 1;
        a[j] += 1;
        self.partial(&a)
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut a = vec![0u8; self.sp.nvars];
        a[i] += 1;
        a[j] += 1;
        a[k] += 1;
        self.partial(&a)
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.sp.nvars).map(|i| self.d1(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let n = self.sp.nvars;
        (0..n).map(|i| (0..n).map(|j| self.d2(i, j)).collect()).collect()
    }

    /// Jet of `∂f/∂x_var`; valid to one order less than `self`.
    pub fn deriv(&self, var: usize) -> Jet<'s> {
        let mut out = self.sp.zero();
        for &(src, dst, f) in &self.sp.deriv[var] {
            out.c[dst] += f * self.c[src];
        }
        out
    }

    pub fn add(&self, o: &Jet<'s>) -> Jet<'s> {
        let c = self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect();
        Jet { sp: self.sp, c }
    }

    pub fn sub(&self, o: &Jet<'s>) -> Jet<'s> {
        let c = self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect();
        Jet { sp: self.sp, c }
    }

    pub fn add_assign(&mut self, o: &Jet<'s>) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, s: f64, o: &Jet<'s>) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> Jet<'s> {
        Jet { sp: self.sp, c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn add_const(&self, v: f64) -> Jet<'s> {
        let mut out = self.clone();
        out.c[0] += v;
        out
    }

    pub fn mul(&self, o: &Jet<'s>) -> Jet<'s> {
        let mut out = vec![0.0; self.c.len()];
        for &(i, j, k) in &self.sp.mul {
            let a = self.c[i as usize];
            if a != 0.0 {
                out[k as usize] += a * o.c[j as usize];
            }
        }
        Jet { sp: self.sp, c: out }
    }

    /// `g(self)` given `derivs[k] = g^{(k)}(self.value())` for k = 0..=order.
    pub fn compose(&self, derivs: &[f64]) -> Jet<'s> {
        let order = self.sp.order;
        assert!(derivs.len() > order, "need {} derivatives", order + 1);
        let mut u = self.clone();
        u.c[0] = 0.0;
        // Horner in the nilpotent part u.
        let mut acc = self.sp.constant(derivs[order] / self.sp.factorials[order]);
        for k in (0..order).rev() {
            acc = acc.mul(&u);
            acc.c[0] += derivs[k] / self.sp.factorials[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet<'s> {
        let e = self.value().exp();
        self.compose(&vec![e; self.sp.order + 1])
    }

    pub fn ln(&self) -> Jet<'s> {
        let a = self.value();
        let mut d = vec![a.ln()];
        for k in 1..=self.sp.order {
            // (k-1)! (-1)^{k-1} / a^k
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * self.sp.factorials[k - 1] / a.powi(k as i32));
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Jet<'s> {
        let a = self.value();
        let d: Vec<f64> = (0..=self.sp.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.sp.factorials[k] / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&d)
    }

    pub fn div(&self, o: &Jet<'s>) -> Jet<'s> {
        self.mul(&o.recip())
    }

    pub fn sin(&self) -> Jet<'s> {
        let (s, c) = self.value().sin_cos();
        let d: Vec<f64> = (0..=self.sp.order).map(|k| [s, c, -s, -c][k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet<'s> {
        let (s, c) = self.value().sin_cos();
        let d: Vec<f64> = (0..=self.sp.order).map(|k| [c, -s, -c, s][k % 4]).collect();
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Jet<'s> {
        let a = self.value();
        let mut d = Vec::with_capacity(self.sp.order + 1);
        let mut coef = 1.0;
        let mut p = 0.5;
        for _ in 0..=self.sp.order {
            d.push(coef * a.powf(p));
            coef *= p;
            p -= 1.0;
        }
        self.compose(&d)
    }
}

/// Determinant of a small square matrix of jets (Gaussian elimination, no pivoting).
/// Intended for positive-definite matrices where leading minors never vanish.
pub fn jet_det<'s>(m: &[Vec<Jet<'s>>]) -> Jet<'s> {
    let n = m.len();
    let sp = m[0][0].space();
    let mut a: Vec<Vec<Jet<'s>>> = m.to_vec();
    let mut det = sp.constant(1.0);
    for k in 0..n {
        let piv = a[k][k].clone();
        det = det.mul(&piv);
        let inv = piv.recip();
        for i in (k + 1)..n {
            let f = a[i][k].mul(&inv);
            for j in (k + 1)..n {
                let t = f.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
    }
    det
}

/// Inverse of a small square matrix of jets via Gauss-Jordan (no pivoting).
pub fn jet_inverse<'s>(m: &[Vec<Jet<'s>>]) -> Vec<Vec<Jet<'s>>> {
    let n = m.len();
    let sp = m[0][0].space();
    let mut a: Vec<Vec<Jet<'s>>> = m.to_vec();
    let mut inv: Vec<Vec<Jet<'s>>> = (0..n)
        .map(|i| (0..n).map(|j| sp.constant(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for k in 0..n {
        let p = a[k][k].recip();
        for j in 0..n {
            a[k][j] = a[k][j].mul(&p);
            inv[k][j] = inv[k][j].mul(&p);
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i][k].clone();
            for j in 0..n {
                let t = f.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
                let t = f.mul(&inv[k][j]);
                inv[i][j] = inv[i][j].sub(&t);
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn layout_sizes() {
        // C(d + K, K)
        assert_eq!(JetSpace::new(2, 4).len(), 15);
        assert_eq!(JetSpace::new(4, 4).len(), 70);
        assert_eq!(JetSpace::new(1, 5).len(), 6);
    }

    #[test]
    fn product_rule_and_partials() {
        let sp = JetSpace::new(2, 3);
        let x = sp.variable(0, 0.3);
        let y = sp.variable(1, -0.7);
        let f = x.mul(&x).mul(&y); // x² y
        assert_relative_eq!(f.value(), 0.09 * -0.7, epsilon = 1e-15);
        assert_relative_eq!(f.d1(0), 2.0 * 0.3 * -0.7, epsilon = 1e-15);
        assert_relative_eq!(f.d2(0, 1), 0.6, epsilon = 1e-15);
        assert_relative_eq!(f.d3(0, 0, 1), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn log_of_one_minus_square() {
        // ρ = −2 log(1 − x²): ρ''(0) = 4, ρ''''(0) = 48.
        let sp = JetSpace::new(1, 5);
        let x = sp.variable(0, 0.0);
        let rho = sp.constant(1.0).sub(&x.mul(&x)).ln().scale(-2.0);
        assert_relative_eq!(rho.partial(&[2]), 4.0, epsilon = 1e-12);
        assert_relative_eq!(rho.partial(&[4]), 24.0, epsilon = 1e-12);
        assert_relative_eq!(rho.partial(&[3]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trig_and_exp_identities() {
        let sp = JetSpace::new(2, 4);
        let x = sp.affine(0.4, &[1.0, 0.5]);
        let s = x.sin();
        let c = x.cos();
        let one = s.mul(&s).add(&c.mul(&c));
        assert_relative_eq!(one.value(), 1.0, epsilon = 1e-14);
        for v in &one.coeffs()[1..] {
            assert!(v.abs() < 1e-13);
        }
        let e = x.exp().ln().sub(&x);
        for v in e.coeffs() {
            assert!(v.abs() < 1e-13);
        }
        let r = x.sqrt();
        let back = r.mul(&r).sub(&x);
        for v in back.coeffs() {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn deriv_lowers_order() {
        let sp = JetSpace::new(2, 4);
        let x = sp.variable(0, 0.2);
        let y = sp.variable(1, 0.1);
        let f = x.mul(&x).mul(&x).mul(&y).exp();
        let fx = f.deriv(0);
        // ∂_x f at point then ∂_y of that
        assert_relative_eq!(fx.value(), f.d1(0), epsilon = 1e-14);
        assert_relative_eq!(fx.d1(1), f.d2(0, 1), epsilon = 1e-13);
        assert_relative_eq!(fx.d2(0, 1), f.d3(0, 0, 1), epsilon = 1e-12);
    }

    #[test]
    fn det_and_inverse() {
        let sp = JetSpace::new(1, 2);
        let t = sp.variable(0, 0.5);
        let m = vec![
            vec![t.add_const(2.0), t.clone()],
            vec![t.clone(), t.mul(&t).add_const(3.0)],
        ];
        let d = jet_det(&m);
        // (t+2)(t²+3) − t² at t = 0.5 and its derivative
        let f = |t: f64| (t + 2.0) * (t * t + 3.0) - t * t;
        assert_relative_eq!(d.value(), f(0.5), epsilon = 1e-14);
        let df = |t: f64| (t * t + 3.0) + (t + 2.0) * 2.0 * t - 2.0 * t;
        assert_relative_eq!(d.d1(0), df(0.5), epsilon = 1e-13);
        let inv = jet_inverse(&m);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = sp.zero();
                for k in 0..2 {
                    s.add_assign(&m[i][k].mul(&inv[k][j]));
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - target).abs() < 1e-14);
                for v in &s.coeffs()[1..] {
                    assert!(v.abs() < 1e-13);
                }
            }
        }
    }
}
