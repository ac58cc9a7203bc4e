//! Kähler metrics from potentials in log-polar coordinates `(x, θ)`.
//!
//! Ambient real coordinates are ordered `X = (x_1..x_n, θ_1..θ_n)` with
//! `z_j = exp((x_j + iθ_j)/2)`. For a potential `P(x, θ)` the Riemannian
//! metric of `ω = i∂∂̄P` is `G = (H − JHJ)/2`, `H` the real Hessian and `J`
//! the complex structure `J∂x = ∂θ`. The Kähler form matrix is `Ω = −JG`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::{self, jet_det, jet_inverse, Jet, JetSpace};
use crate::toric::{q_value, ToricPotential, WeightedFan};

/// A smooth perturbation `f(x, θ)` of the Kähler potential.
pub trait Perturbation: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Evaluates `f` on jets of the coordinates; the result lives in their space.
    fn eval<'s>(&self, x: &[Jet<'s>], theta: &[Jet<'s>]) -> Jet<'s>;

    fn theta_independent(&self) -> bool;

    /// Largest `|k_j|` among the angular modes `cos(k·θ/2 + φ)`.
    fn max_frequency(&self) -> usize;

    fn value(&self, x: &[f64], theta: &[f64]) -> f64 {
        let sp = jet::space(2 * self.dim(), 0);
        let xs: Vec<Jet> = x.iter().map(|&v| sp.constant(v)).collect();
        let ts: Vec<Jet> = theta.iter().map(|&v| sp.constant(v)).collect();
        self.eval(&xs, &ts).value()
    }
}

/// One term `amp · τ^{-decay·[k≠0]} · bump(x/τ) · cos(k·θ/2 + phase)`.
///
/// The bump is `exp(1 − 1/(1 − r²))` with `r = |x/τ − center| / width`,
/// or identically 1 when `width` is not a positive finite number.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mode {
    pub k: Vec<i64>,
    pub center: Vec<f64>,
    pub width: f64,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Mode {
    pub fn has_bump(&self) -> bool {
        self.width.is_finite() && self.width > 0.0
    }
}

/// A finite sum of [`Mode`]s at scale τ.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSum {
    pub dim: usize,
    pub tau: f64,
    pub decay: f64,
    pub modes: Vec<Mode>,
}

impl ModeSum {
    pub fn new(dim: usize, tau: f64, modes: Vec<Mode>) -> Self {
        ModeSum { dim, tau, decay: 3.0, modes }
    }

    pub fn zero(dim: usize, tau: f64) -> Self {
        ModeSum::new(dim, tau, Vec::new())
    }

    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = decay;
        self
    }

    fn mode_jet<'s>(&self, mode: &Mode, x: &[Jet<'s>], theta: &[Jet<'s>]) -> Jet<'s> {
        let sp = x[0].space();
        let oscillating = mode.k.iter().any(|&k| k != 0);
        let mut amp = mode.amp;
        if oscillating {
            amp *= self.tau.powf(-self.decay);
        }
        let mut out = sp.constant(amp);
        if mode.has_bump() {
            let mut r2 = sp.zero();
            for (xj, cj) in x.iter().zip(&mode.center) {
                let d = xj.scale(1.0 / (self.tau * mode.width)).add_const(-cj / mode.width);
                r2.add_assign(&d.mul(&d));
            }
            if r2.value() >= 1.0 {
                return sp.zero();
            }
            let u = r2.scale(-1.0).add_const(1.0);
            let b = u.recip().scale(-1.0).add_const(1.0).exp();
            out = out.mul(&b);
        }
        if oscillating {
            let mut arg = sp.constant(mode.phase);
            for (tj, &kj) in theta.iter().zip(&mode.k) {
                arg.axpy(0.5 * kj as f64, tj);
            }
            out = out.mul(&arg.cos());
        }
        out
    }
}

impl Perturbation for ModeSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval<'s>(&self, x: &[Jet<'s>], theta: &[Jet<'s>]) -> Jet<'s> {
        let mut acc = x[0].space().zero();
        for m in &self.modes {
            acc.add_assign(&self.mode_jet(m, x, theta));
        }
        acc
    }

    fn theta_independent(&self) -> bool {
        self.modes.iter().all(|m| m.k.iter().all(|&k| k == 0))
    }

    fn max_frequency(&self) -> usize {
        self.modes
            .iter()
            .flat_map(|m| m.k.iter().map(|k| k.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }
}

/// The synthetic near-Kähler-Einstein perturbation
/// `f = b⁰ + b¹ − Σ_m log(1 + b_m/(τ q_m))²`.
#[derive(Debug, Clone)]
pub struct SynthKe {
    pub fan: WeightedFan,
    pub tau: f64,
    pub b0: ModeSum,
    pub b1: ModeSum,
    pub bm: Vec<ModeSum>,
    pub ke_correction: Option<LineKeCorrection>,
}

impl Perturbation for SynthKe {
    fn dim(&self) -> usize {
        self.fan.dim()
    }

    fn eval<'s>(&self, x: &[Jet<'s>], theta: &[Jet<'s>]) -> Jet<'s> {
        let mut acc = self.b0.eval(x, theta);
        acc.add_assign(&self.b1.eval(x, theta));
        for ((m, &w), b) in self.fan.rays().iter().zip(self.fan.weights()).zip(&self.bm) {
            if b.modes.is_empty() {
                continue;
            }
            let mut q = x[0].space().constant(w);
            for (xj, &mj) in x.iter().zip(m) {
                q.axpy(mj as f64 / self.tau, xj);
            }
            let ratio = b.eval(x, theta).div(&q.scale(self.tau));
            acc.axpy(-2.0, &ratio.add_const(1.0).ln());
        }
        if let Some(c) = &self.ke_correction {
            acc.add_assign(&c.eval(x, theta));
        }
        acc
    }

    fn theta_independent(&self) -> bool {
        self.b0.theta_independent()
            && self.b1.theta_independent()
            && self.bm.iter().all(|b| b.theta_independent())
    }

    fn max_frequency(&self) -> usize {
        std::iter::once(&self.b0)
            .chain(std::iter::once(&self.b1))
            .chain(&self.bm)
            .map(|b| b.max_frequency())
            .max()
            .unwrap_or(0)
    }
}

/// `b⁰ = −2 log cos(πx/2τ) + 2 log(1 − x²/τ²)` on the line fan, which turns
/// `ρ_τ = −2 log(1 − x²/τ²)` into the exact Einstein potential
/// `−2 log cos(πx/2τ)`: with `G = ρ''/2` the Gauss curvature is
/// `−(log ρ'')''/ρ''`, and `ρ'' = (π²/2τ²) sec²(πx/2τ)` solves `(log ρ'')'' = ρ''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineKeCorrection {
    pub tau: f64,
}

impl Perturbation for LineKeCorrection {
    fn dim(&self) -> usize {
        1
    }

    fn eval<'s>(&self, x: &[Jet<'s>], _theta: &[Jet<'s>]) -> Jet<'s> {
        let u = x[0].scale(1.0 / self.tau);
        let c = u.scale(std::f64::consts::FRAC_PI_2).cos().ln().scale(-2.0);
        let b = u.mul(&u).scale(-1.0).add_const(1.0).ln().scale(2.0);
        c.add(&b)
    }

    fn theta_independent(&self) -> bool {
        true
    }

    fn max_frequency(&self) -> usize {
        0
    }
}

/// `f = f⁰ + f¹` with `f⁰` the average of `f` over the fibre torus,
/// computed by the trapezoidal rule on `(2·resolution + 1)^n` angles.
#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    f: Arc<dyn Perturbation>,
    resolution: usize,
    angles: Vec<Vec<f64>>,
}

impl PerturbationSplit {
    pub fn perturbation(&self) -> &Arc<dyn Perturbation> {
        &self.f
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Jet of `f⁰` in the space of the coordinate jets `x`.
    pub fn f0_jet<'s>(&self, x: &[Jet<'s>]) -> Jet<'s> {
        let sp = x[0].space();
        if self.f.theta_independent() {
            let zeros: Vec<Jet> = (0..x.len()).map(|_| sp.zero()).collect();
            return self.f.eval(x, &zeros);
        }
        let mut acc = sp.zero();
        for th in &self.angles {
            let ts: Vec<Jet> = th.iter().map(|&v| sp.constant(v)).collect();
            acc.add_assign(&self.f.eval(x, &ts));
        }
        acc.scale(1.0 / self.angles.len() as f64)
    }

    /// Jets of `(f⁰, f¹)` at the point described by the coordinate jets.
    pub fn split_jet<'s>(&self, x: &[Jet<'s>], theta: &[Jet<'s>]) -> (Jet<'s>, Jet<'s>) {
        if self.f.theta_independent() {
            let f0 = self.f.eval(x, theta);
            let z = f0.space().zero();
            return (f0, z);
        }
        let f0 = self.f0_jet(x);
        let f1 = self.f.eval(x, theta).sub(&f0);
        (f0, f1)
    }

    pub fn f0(&self, x: &[f64]) -> f64 {
        let sp = jet::space(self.dim(), 0);
        let xs: Vec<Jet> = x.iter().map(|&v| sp.constant(v)).collect();
        self.f0_jet(&xs).value()
    }

    pub fn f1(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.f.value(x, theta) - self.f0(x)
    }
}

/// Splits `f` into fibre average and oscillatory part. The quadrature is
/// exact for trigonometric polynomials in θ with `|k_j| ≤ 2·resolution`.
pub fn fiber_decompose(f: Arc<dyn Perturbation>, resolution: usize) -> PerturbationSplit {
    let resolution = resolution.max(1);
    let m = 2 * resolution + 1;
    let n = f.dim();
    let h = 4.0 * std::f64::consts::PI / m as f64;
    let angles = (0..m.pow(n as u32))
        .map(|mut flat| {
            let mut th = vec![0.0; n];
            for slot in th.iter_mut().rev() {
                *slot = (flat % m) as f64 * h;
                flat /= m;
            }
            th
        })
        .collect();
    PerturbationSplit { f, resolution, angles }
}

/// Averaging resolution for a perturbation: enough for products of up to
/// four angular modes.
pub fn default_resolution(f: &dyn Perturbation) -> usize {
    (2 * f.max_frequency()).max(2)
}

/// Parameters of the family `ω̂_{τ,s} = scale·(ω⁰ + s·i∂∂̄f¹)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub tau: f64,
    pub s: f64,
    pub scale: f64,
}

impl FamilyParams {
    /// The rescaled family `ĝ = τ² g`.
    pub fn rescaled(tau: f64, s: f64) -> Self {
        FamilyParams { tau, s, scale: tau * tau }
    }

    /// The unscaled metric `g` of `ρ_τ + f⁰ + s f¹`.
    pub fn unscaled(tau: f64, s: f64) -> Self {
        FamilyParams { tau, s, scale: 1.0 }
    }

    pub fn at(self, s: f64) -> Self {
        FamilyParams { s, ..self }
    }
}

/// Toric potential plus an optional perturbation.
#[derive(Debug, Clone)]
pub struct KahlerPotential {
    toric: Arc<dyn ToricPotential>,
    split: Option<PerturbationSplit>,
}

impl KahlerPotential {
    pub fn toric(toric: Arc<dyn ToricPotential>) -> Self {
        KahlerPotential { toric, split: None }
    }

    pub fn perturbed(toric: Arc<dyn ToricPotential>, f: Arc<dyn Perturbation>) -> Result<Self> {
        let res = default_resolution(f.as_ref());
        Self::with_split(toric, fiber_decompose(f, res))
    }

    pub fn with_split(toric: Arc<dyn ToricPotential>, split: PerturbationSplit) -> Result<Self> {
        if split.dim() != toric.dim() {
            return Err(Error::Dimension(format!(
                "perturbation dimension {} vs toric dimension {}",
                split.dim(),
                toric.dim()
            )));
        }
        Ok(KahlerPotential { toric, split: Some(split) })
    }

    pub fn dim(&self) -> usize {
        self.toric.dim()
    }

    pub fn tau(&self) -> f64 {
        self.toric.tau()
    }

    pub fn toric_part(&self) -> &Arc<dyn ToricPotential> {
        &self.toric
    }

    pub fn split(&self) -> Option<&PerturbationSplit> {
        self.split.as_ref()
    }

    pub fn theta_independent(&self) -> bool {
        self.split.as_ref().is_none_or(|s| s.f.theta_independent())
    }

    /// The same potential without its oscillatory part: `ρ_τ + f⁰`.
    pub fn averaged(&self) -> Option<(Arc<dyn ToricPotential>, PerturbationSplit)> {
        self.split.as_ref().map(|s| (self.toric.clone(), s.clone()))
    }

    /// Coordinate jets `(x, θ)` around a point in the 2n-variable space `sp`.
    pub fn coordinate_jets<'s>(
        sp: &'s JetSpace,
        x: &[f64],
        theta: &[f64],
    ) -> (Vec<Jet<'s>>, Vec<Jet<'s>>) {
        let n = x.len();
        let xs = x.iter().enumerate().map(|(i, &v)| sp.variable(i, v)).collect();
        let ts = theta.iter().enumerate().map(|(i, &v)| sp.variable(n + i, v)).collect();
        (xs, ts)
    }

    /// Jet of the toric part lifted to the 2n-variable space.
    pub fn toric_jet<'s>(&self, sp: &'s JetSpace, x: &[f64]) -> Result<Jet<'s>> {
        let n = self.dim();
        let rho = self.toric.rho_jet(x, sp.order())?;
        Ok(sp.from_derivatives(|alpha| {
            if alpha[n..].iter().any(|&a| a != 0) {
                0.0
            } else {
                rho.partial(&alpha[..n])
            }
        }))
    }

    /// Jet of `scale · (ρ_τ + f⁰ + s f¹)` in the 2n-variable space `sp`.
    pub fn potential_jet<'s>(
        &self,
        sp: &'s JetSpace,
        x: &[f64],
        theta: &[f64],
        fp: &FamilyParams,
    ) -> Result<Jet<'s>> {
        let mut p = self.toric_jet(sp, x)?;
        if let Some(split) = &self.split {
            let (xs, ts) = Self::coordinate_jets(sp, x, theta);
            let (f0, f1) = split.split_jet(&xs, &ts);
            p.add_assign(&f0);
            p.axpy(fp.s, &f1);
        }
        Ok(p.scale(fp.scale))
    }

    /// Jet of `f¹` in the 2n-variable space `sp` (zero without perturbation).
    pub fn f1_jet<'s>(&self, sp: &'s JetSpace, x: &[f64], theta: &[f64]) -> Jet<'s> {
        match &self.split {
            None => sp.zero(),
            Some(split) => {
                let (xs, ts) = Self::coordinate_jets(sp, x, theta);
                split.split_jet(&xs, &ts).1
            }
        }
    }
}

/// `M(P) = (H − JHJ)/2` applied to a jet: the metric tensor of `i∂∂̄P`
/// as a matrix of jets.
pub fn metric_from_potential<'s>(p: &Jet<'s>, n: usize) -> Vec<Vec<Jet<'s>>> {
    let d: Vec<Jet> = (0..2 * n).map(|a| p.deriv(a)).collect();
    let h = |a: usize, b: usize| d[a].deriv(b);
    let mut g = vec![vec![p.space().zero(); 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let diag = h(i, j).add(&h(n + i, n + j)).scale(0.5);
            let off = h(i, n + j).sub(&h(n + i, j)).scale(0.5);
            g[i][j] = diag.clone();
            g[n + i][n + j] = diag;
            g[i][n + j] = off.clone();
            g[n + j][i] = off;
        }
    }
    g
}

/// `M(H)` for a plain symmetric Hessian matrix.
pub fn kahler_symmetrize(h: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let diag = 0.5 * (h[(i, j)] + h[(n + i, n + j)]);
            let off = 0.5 * (h[(i, n + j)] - h[(n + i, j)]);
            g[(i, j)] = diag;
            g[(n + i, n + j)] = diag;
            g[(i, n + j)] = off;
            g[(n + j, i)] = off;
        }
    }
    g
}

/// The complex structure `J` in `(x, θ)` coordinates.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(n + i, i)] = 1.0;
        j[(i, n + i)] = -1.0;
    }
    j
}

/// Kähler form matrix `Ω` with `ω(U, V) = Uᵀ Ω V = G(JU, V)`.
pub fn kahler_form(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows() / 2;
    -(complex_structure(n) * g)
}

fn jets_to_matrix(m: &[Vec<Jet>], f: impl Fn(&Jet) -> f64) -> DMatrix<f64> {
    let k = m.len();
    DMatrix::from_fn(k, k, |a, b| f(&m[a][b]))
}

fn unit(nvars: usize, a: usize, b: Option<usize>) -> Vec<u8> {
    let mut e = vec![0u8; nvars];
    e[a] += 1;
    if let Some(b) = b {
        e[b] += 1;
    }
    e
}

/// Metric, connection and curvature at one point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub order: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// Hessian `∂_a∂_b P` of the potential.
    pub potential_hessian: DMatrix<f64>,
    /// `dg[c][(a, b)] = ∂_c g_ab` (order ≥ 1).
    pub dg: Vec<DMatrix<f64>>,
    /// `christoffel[(a·d + b)·d + c] = Γ^a_bc` (order ≥ 1).
    pub christoffel: Vec<f64>,
    /// Lowered `R_abcd` with `Ric_bd = g^{ac} R_abcd` (order ≥ 2).
    pub riemann: Vec<f64>,
    /// Ricci tensor from `M(−½ log det G)` (order ≥ 2).
    pub ricci: Option<DMatrix<f64>>,
}

impl MetricJet {
    pub fn real_dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        let d = self.real_dim();
        self.christoffel[(a * d + b) * d + c]
    }

    pub fn riemann_lower(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.real_dim();
        self.riemann[((a * d + b) * d + c) * d + e]
    }

    /// Ricci tensor by contracting the Riemann tensor.
    pub fn ricci_contracted(&self) -> Option<DMatrix<f64>> {
        if self.riemann.is_empty() {
            return None;
        }
        let d = self.real_dim();
        Some(DMatrix::from_fn(d, d, |b, e| {
            let mut s = 0.0;
            for a in 0..d {
                for c in 0..d {
                    s += self.g_inv[(a, c)] * self.riemann_lower(c, b, a, e);
                }
            }
            s
        }))
    }

    /// Hermitian components `h_{jk̄} = ∂_{w_j}∂_{w̄_k} P` (real and imaginary
    /// parts), with `ds² = 2 Re Σ h_{jk̄} dw_j dw̄_k` and `w = x + iθ`.
    pub fn hermitian(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.real_dim() / 2;
        let h = &self.potential_hessian;
        let re = DMatrix::from_fn(n, n, |j, k| 0.25 * (h[(j, k)] + h[(n + j, n + k)]));
        let im = DMatrix::from_fn(n, n, |j, k| 0.25 * (h[(j, n + k)] - h[(n + j, k)]));
        (re, im)
    }

    pub fn kahler_form(&self) -> DMatrix<f64> {
        kahler_form(&self.g)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.g)
    }
}

pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    let sym = (g + g.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Metric jet of `scale·(ρ_τ + f⁰ + s f¹)` at `(x, θ)` with `order`
/// derivatives of the metric (0: metric, 1: Christoffels, 2: curvature).
pub fn metric_jet(
    p: &KahlerPotential,
    x: &[f64],
    theta: &[f64],
    order: usize,
    fp: &FamilyParams,
) -> Result<MetricJet> {
    let n = p.dim();
    let d = 2 * n;
    let order = order.min(3);
    let sp = jet::space(d, order + 2);
    let pj = p.potential_jet(sp, x, theta, fp)?;
    let gj = metric_from_potential(&pj, n);
    let g = jets_to_matrix(&gj, |j| j.value());
    let lam = min_eigenvalue(&g);
    if !(lam >= 1e-12) {
        return Err(Error::DegenerateMetric(lam));
    }
    let g_inv = g.clone().try_inverse().ok_or(Error::DegenerateMetric(lam))?;
    let potential_hessian = DMatrix::from_fn(d, d, |a, b| pj.d2(a, b));
    let mut out = MetricJet {
        x: x.to_vec(),
        theta: theta.to_vec(),
        order,
        g,
        g_inv,
        potential_hessian,
        dg: Vec::new(),
        christoffel: Vec::new(),
        riemann: Vec::new(),
        ricci: None,
    };
    if order == 0 {
        return Ok(out);
    }
    out.dg = (0..d).map(|c| jets_to_matrix(&gj, |j| j.d1(c))).collect();
    // lowered Γ_{e,bc} = ½(∂_b g_ec + ∂_c g_eb − ∂_e g_bc)
    let low = |e: usize, b: usize, c: usize, dg: &[DMatrix<f64>]| {
        0.5 * (dg[b][(e, c)] + dg[c][(e, b)] - dg[e][(b, c)])
    };
    let mut gl = vec![0.0; d * d * d];
    for e in 0..d {
        for b in 0..d {
            for c in 0..d {
                gl[(e * d + b) * d + c] = low(e, b, c, &out.dg);
            }
        }
    }
    let mut gam = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for e in 0..d {
                    s += out.g_inv[(a, e)] * gl[(e * d + b) * d + c];
                }
                gam[(a * d + b) * d + c] = s;
            }
        }
    }
    out.christoffel = gam;
    if order == 1 {
        return Ok(out);
    }
    // ∂_f ∂_h g_ab
    let ddg = |f: usize, h: usize, a: usize, b: usize| gj[a][b].partial(&unit(d, f, Some(h)));
    // ∂_f Γ_{e,bc}
    let dlow = |f: usize, e: usize, b: usize, c: usize| {
        0.5 * (ddg(f, b, e, c) + ddg(f, c, e, b) - ddg(f, e, b, c))
    };
    let mut riem = vec![0.0; d * d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    // R_abce = ∂_cΓ_{a,eb} − ∂_eΓ_{a,cb} − Γ_{f,ac}Γ^f_eb + Γ_{f,ae}Γ^f_cb
                    let mut r = dlow(c, a, e, b) - dlow(e, a, c, b);
                    for f in 0..d {
                        r -= gl[(f * d + a) * d + c] * out.christoffel[(f * d + e) * d + b];
                        r += gl[(f * d + a) * d + e] * out.christoffel[(f * d + c) * d + b];
                    }
                    riem[((a * d + b) * d + c) * d + e] = r;
                }
            }
        }
    }
    out.riemann = riem;
    let logdet = jet_det(&gj).ln().scale(-0.5);
    let ric = metric_from_potential(&logdet, n);
    out.ricci = Some(jets_to_matrix(&ric, |j| j.value()));
    Ok(out)
}

/// Ricci tensor `M(−½ log det G)` at `(x, θ)`.
pub fn ricci(p: &KahlerPotential, x: &[f64], theta: &[f64], fp: &FamilyParams) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let sp = jet::space(2 * n, 4);
    let pj = p.potential_jet(sp, x, theta, fp)?;
    let gj = metric_from_potential(&pj, n);
    let g = jets_to_matrix(&gj, |j| j.value());
    let lam = min_eigenvalue(&g);
    if !(lam >= 1e-12) {
        return Err(Error::DegenerateMetric(lam));
    }
    let logdet = jet_det(&gj).ln().scale(-0.5);
    Ok(jets_to_matrix(&metric_from_potential(&logdet, n), |j| j.value()))
}

/// Hamiltonian-gradient field `V = −½ τ² ∇_{ĝ_{τ,s}} f¹` and, optionally,
/// its Jacobian `∂V^a/∂X^b`.
///
/// The factor ½ makes `V` the Moser field of `ω = i∂∂̄P`:
/// `ι_V ω̂_s = −½ d^c(τ² f¹)`, so `d/ds ω̂_s + L_V ω̂_s = 0`.
pub fn ham_field(
    p: &KahlerPotential,
    fp: &FamilyParams,
    x: &[f64],
    theta: &[f64],
    with_jacobian: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let n = p.dim();
    let d = 2 * n;
    if p.split().is_none() || p.theta_independent() {
        let jac = with_jacobian.then(|| DMatrix::zeros(d, d));
        return Ok((vec![0.0; d], jac));
    }
    let sp = jet::space(d, 2 + usize::from(with_jacobian));
    let pj = p.potential_jet(sp, x, theta, fp)?;
    let gj = metric_from_potential(&pj, n);
    let gval = jets_to_matrix(&gj, |j| j.value());
    let lam = min_eigenvalue(&gval);
    if !(lam >= 1e-12) {
        return Err(Error::DegenerateMetric(lam));
    }
    let f1 = p.f1_jet(sp, x, theta).scale(fp.scale);
    let df: Vec<Jet> = (0..d).map(|b| f1.deriv(b)).collect();
    let v: Vec<Jet> = if with_jacobian {
        let ginv = jet_inverse(&gj);
        (0..d)
            .map(|a| {
                let mut s = sp.zero();
                for b in 0..d {
                    s.axpy(-0.5, &ginv[a][b].mul(&df[b]));
                }
                s
            })
            .collect()
    } else {
        let ginv = gval.try_inverse().ok_or(Error::DegenerateMetric(lam))?;
        (0..d)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..d {
                    s -= 0.5 * ginv[(a, b)] * df[b].value();
                }
                sp.constant(s)
            })
            .collect()
    };
    let vals = v.iter().map(|j| j.value()).collect();
    let jac = with_jacobian.then(|| DMatrix::from_fn(d, d, |a, b| v[a].d1(b)));
    Ok((vals, jac))
}

/// `V` for the split's family at a point; see [`ham_field`].
pub fn ham_gradient(p: &KahlerPotential, fp: &FamilyParams, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    Ok(ham_field(p, fp, x, theta, false)?.0)
}

/// Built-in b-function families of the synthetic near-Kähler-Einstein potential.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthKeSpec {
    pub b0: Vec<Mode>,
    pub b1: Vec<Mode>,
    /// One mode list per ray of the fan, in fan order (missing entries are zero).
    pub bm: Vec<Vec<Mode>>,
    pub decay: Option<f64>,
    /// Adds the exact Einstein correction of the line fan to `b⁰`.
    pub line_ke_correction: bool,
}

/// Assembles `ρ_τ + f_τ` for the synthetic family and checks convexity on a
/// probe grid over `Δ_{cτ}` (c = 0.9) times a fibre grid.
pub fn synth_ke_family(
    spec: &SynthKeSpec,
    toric: Arc<dyn ToricPotential>,
    fan: &WeightedFan,
    probes: &[Vec<f64>],
) -> Result<KahlerPotential> {
    let n = fan.dim();
    let tau = toric.tau();
    let decay = spec.decay.unwrap_or(3.0);
    let sum = |modes: &[Mode]| ModeSum::new(n, tau, modes.to_vec()).with_decay(decay);
    let bm = (0..fan.rays().len())
        .map(|i| sum(spec.bm.get(i).map(|v| v.as_slice()).unwrap_or(&[])))
        .collect();
    let ke_correction = if spec.line_ke_correction {
        let line = fan.dim() == 1
            && fan.rays().len() == 2
            && fan.rays().iter().all(|m| m[0].abs() == 1)
            && fan.rays()[0][0] == -fan.rays()[1][0]
            && fan.weights().iter().all(|&w| w == -1.0);
        if !line {
            return Err(Error::Dimension("the Einstein correction is only available for the line fan with weights −1".into()));
        }
        Some(LineKeCorrection { tau })
    } else {
        None
    };
    let f = SynthKe { fan: fan.clone(), tau, b0: sum(&spec.b0), b1: sum(&spec.b1), bm, ke_correction };
    let p = KahlerPotential::perturbed(toric, Arc::new(f))?;
    check_convexity(&p, probes, 5)?;
    Ok(p)
}

/// Fails with `AmplitudeTooLarge` at the first probe `(x, θ)` where the
/// full metric is not positive definite.
pub fn check_convexity(p: &KahlerPotential, probes: &[Vec<f64>], fiber_points: usize) -> Result<()> {
    let n = p.dim();
    let fp = FamilyParams::unscaled(p.tau(), 1.0);
    let m = if p.theta_independent() { 1 } else { fiber_points.max(1) };
    for x in probes {
        for flat in 0..m.pow(n as u32) {
            let mut theta = vec![0.0; n];
            let mut r = flat;
            for t in theta.iter_mut().rev() {
                *t = 4.0 * std::f64::consts::PI * (r % m) as f64 / m as f64;
                r /= m;
            }
            match metric_jet(p, x, &theta, 0, &fp) {
                Ok(_) => {}
                Err(Error::DegenerateMetric(_)) => {
                    let mut at = x.clone();
                    at.extend(theta);
                    return Err(Error::AmplitudeTooLarge(at));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

/// `sup |f¹|` over the base samples times a `(2·modes+1)^n` fibre grid.
pub fn sup_oscillation(split: &PerturbationSplit, xs: &[Vec<f64>], modes: usize) -> f64 {
    let n = split.dim();
    let m = 2 * modes + 1;
    let mut sup: f64 = 0.0;
    for x in xs {
        let f0 = split.f0(x);
        for flat in 0..m.pow(n as u32) {
            let mut theta = vec![0.0; n];
            let mut r = flat;
            for t in theta.iter_mut().rev() {
                *t = 4.0 * std::f64::consts::PI * (r % m) as f64 / m as f64;
                r /= m;
            }
            sup = sup.max((split.f.value(x, &theta) - f0).abs());
        }
    }
    sup
}

/// `sup max_{ab} |Ric_ab − λ g_ab|` over the samples (λ = −1), in the
/// unscaled coordinate components.
pub fn einstein_deviation(p: &KahlerPotential, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let fp = FamilyParams::unscaled(p.tau(), 1.0);
    let mut sup: f64 = 0.0;
    for (x, th) in samples {
        let mj = metric_jet(p, x, th, 2, &fp)?;
        let ric = mj.ricci.as_ref().expect("order 2 carries Ricci");
        sup = sup.max((ric + &mj.g).amax());
    }
    Ok(sup)
}

/// q-values `w_m + ⟨m,x⟩/τ` of a fan at a point.
pub fn fan_q_values(fan: &WeightedFan, x: &[f64], tau: f64) -> Vec<f64> {
    fan.rays().iter().zip(fan.weights()).map(|(m, &w)| q_value(m, w, x, tau)).collect()
}
