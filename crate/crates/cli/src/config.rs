//! Run configuration: a TOML file plus command line overrides.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! tau = 20.0
//! c = 0.5
//!
//! [fan]
//! rays = [[1], [-1]]
//! weights = [-1, "-1/1"]
//!
//! [[perturbation.mode]]
//! k = [1]
//! center = [0.05]
//! width = 0.5
//! amp = 0.05
//! phase = 0.4
//! ```
//!
//! A `[synthetic]` section with `b0`, `b1` and `bm` mode lists replaces
//! `[perturbation]` for the near-Einstein family. Further sections:
//! `[spectral]`, `[solver]`, `[grid]`, `[fiber]`, `[minimal]`.

use std::ops::Range;
use std::sync::Arc;

use lagfib::kahler::{check_convexity, synth_ke_family, KahlerPotential, Mode, ModeSum, SynthKeSpec};
use lagfib::solver::SolverConfig;
use lagfib::toric::{build_polytope, recenter, FanPotential, Polytope, WeightedFan};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

pub const BUILTIN_NAME: &str = "<builtin line_near_ke>";
pub const BUILTIN: &str = include_str!("../configs/line_near_ke.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Invalid { path: String, line: usize, message: String },
    #[error("{0}")]
    Flag(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    model: RawModel,
    fan: RawFan,
    perturbation: Option<RawPerturbation>,
    synthetic: Option<RawSynthetic>,
    spectral: Option<RawSpectral>,
    solver: Option<SolverConfig>,
    grid: Option<RawGrid>,
    fiber: Option<RawFiber>,
    minimal: Option<RawMinimal>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    tau: Spanned<f64>,
    c: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFan {
    rays: Spanned<Vec<Spanned<Vec<i64>>>>,
    weights: Spanned<Vec<Spanned<Weight>>>,
    recenter: Option<bool>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Weight {
    Number(f64),
    Ratio(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    k: Spanned<Vec<i64>>,
    center: Option<Spanned<Vec<f64>>>,
    width: Option<f64>,
    amp: Spanned<f64>,
    phase: Option<f64>,
    /// Only meaningful in `synthetic.bm`.
    ray: Option<Spanned<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbation {
    decay: Option<f64>,
    #[serde(default)]
    mode: Vec<RawMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    decay: Option<f64>,
    #[serde(default)]
    line_ke_correction: bool,
    #[serde(default)]
    b0: Vec<RawMode>,
    #[serde(default)]
    b1: Vec<RawMode>,
    #[serde(default)]
    bm: Vec<RawMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectral {
    modes: Spanned<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: Option<Spanned<usize>>,
    x: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiber {
    x: Spanned<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMinimal {
    psi_tol: Spanned<f64>,
}

/// Base points of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Lattice with this many points per axis over Δ_{cτ}.
    PerAxis(usize),
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationSpec {
    None,
    Modes(ModeSum),
    Synthetic(SynthKeSpec),
}

/// Command line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tau: Option<f64>,
    pub c: Option<f64>,
    pub modes: Option<usize>,
    pub stages: Option<usize>,
    pub grid: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub path: String,
    pub seed: u64,
    pub fan: WeightedFan,
    pub recenter: bool,
    pub tau: f64,
    pub c: f64,
    pub perturbation: PerturbationSpec,
    pub modes: usize,
    pub solver: SolverConfig,
    pub grid: GridSpec,
    pub fiber_x: Vec<f64>,
    pub psi_tol: f64,
    fan_line: usize,
    perturbation_line: usize,
}

/// The geometry assembled from a [`RunConfig`].
pub struct Model {
    /// The fan after recentering.
    pub fan: WeightedFan,
    /// Original coordinates of the new origin.
    pub shift: Vec<f64>,
    pub polytope: Polytope,
    pub potential: KahlerPotential,
}

fn line_of(src: &str, span: Range<usize>) -> usize {
    src[..span.start.min(src.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    path: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn at(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { path: self.path.to_string(), line: line_of(self.src, span), message: message.into() }
    }

    /// Line of the first header opening the named table or array of tables.
    fn section_line(&self, name: &str) -> usize {
        self.src
            .lines()
            .position(|l| {
                let l = l.trim_start().trim_start_matches('[').trim_start();
                l.strip_prefix(name).is_some_and(|rest| rest.starts_with([']', '.']))
            })
            .map_or(1, |i| i + 1)
    }

    fn section(&self, name: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { path: self.path.to_string(), line: self.section_line(name), message: message.into() }
    }
}

fn parse_weight(w: &Weight) -> Option<f64> {
    let v = match w {
        Weight::Number(v) => *v,
        Weight::Ratio(s) => match s.split_once('/') {
            Some((p, q)) => {
                let (p, q): (i64, i64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
                if q == 0 {
                    return None;
                }
                p as f64 / q as f64
            }
            None => s.trim().parse().ok()?,
        },
    };
    v.is_finite().then_some(v)
}

fn parse_grid(spec: &str, dim: usize) -> Result<GridSpec, String> {
    let spec = spec.trim();
    if let Ok(n) = spec.parse::<usize>() {
        return if n == 0 { Err("grid needs at least one point per axis".into()) } else { Ok(GridSpec::PerAxis(n)) };
    }
    let points = spec
        .split(';')
        .map(|p| {
            let x: Vec<f64> = p.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad grid coordinate '{v}': {e}"))).collect::<Result<_, _>>()?;
            if x.len() != dim {
                return Err(format!("grid point '{p}' has {} coordinates, expected {dim}", x.len()));
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridSpec::Points(points))
}

fn convert_mode(ctx: &Ctx, m: &RawMode, dim: usize, allow_ray: bool) -> Result<Mode, ConfigError> {
    if m.k.get_ref().len() != dim {
        return Err(ctx.at(m.k.span(), format!("mode frequency has {} entries, expected {dim}", m.k.get_ref().len())));
    }
    let center = match &m.center {
        Some(c) if c.get_ref().len() != dim => {
            return Err(ctx.at(c.span(), format!("mode center has {} entries, expected {dim}", c.get_ref().len())))
        }
        Some(c) => c.get_ref().clone(),
        None => vec![0.0; dim],
    };
    if !m.amp.get_ref().is_finite() {
        return Err(ctx.at(m.amp.span(), "mode amplitude must be finite"));
    }
    let width = m.width.unwrap_or(f64::INFINITY);
    if width <= 0.0 || width.is_nan() {
        return Err(ctx.at(m.amp.span(), "mode width must be positive"));
    }
    if !allow_ray {
        if let Some(r) = &m.ray {
            return Err(ctx.at(r.span(), "`ray` is only allowed in synthetic.bm"));
        }
    }
    Ok(Mode { k: m.k.get_ref().clone(), center, width, amp: *m.amp.get_ref(), phase: m.phase.unwrap_or(0.0) })
}

impl RunConfig {
    /// Parses and validates a configuration. Every failure names the line.
    pub fn parse(path: &str, src: &str, ov: &Overrides) -> Result<Self, ConfigError> {
        let ctx = Ctx { path, src };
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s)).unwrap_or(1);
            ConfigError::Invalid { path: path.to_string(), line, message: e.message().trim().to_string() }
        })?;

        let model = &raw.model;
        let tau = ov.tau.unwrap_or(*model.tau.get_ref());
        if !(tau.is_finite() && tau > 0.0) {
            return Err(match ov.tau {
                Some(_) => ConfigError::Flag(format!("--tau must be positive, got {tau}")),
                None => ctx.at(model.tau.span(), format!("tau must be positive, got {tau}")),
            });
        }
        let c = ov.c.or(model.c.as_ref().map(|c| *c.get_ref())).unwrap_or(0.5);
        if !(c > 0.0 && c < 1.0) {
            return Err(match (ov.c, &model.c) {
                (None, Some(s)) => ctx.at(s.span(), format!("c must lie in (0, 1), got {c}")),
                _ => ConfigError::Flag(format!("--c must lie in (0, 1), got {c}")),
            });
        }

        let fan_raw = &raw.fan;
        let rays = fan_raw.rays.get_ref();
        if rays.is_empty() {
            return Err(ctx.at(fan_raw.rays.span(), "fan has no rays"));
        }
        let dim = rays[0].get_ref().len();
        if dim == 0 {
            return Err(ctx.at(rays[0].span(), "ray has no entries"));
        }
        for r in rays {
            if r.get_ref().len() != dim {
                return Err(ctx.at(r.span(), format!("ray has {} entries, expected {dim}", r.get_ref().len())));
            }
            if r.get_ref().iter().all(|&v| v == 0) {
                return Err(ctx.at(r.span(), "ray is zero"));
            }
        }
        let weights = fan_raw.weights.get_ref();
        if weights.len() != rays.len() {
            return Err(ctx.at(fan_raw.weights.span(), format!("{} weights for {} rays", weights.len(), rays.len())));
        }
        let weights: Vec<f64> = weights
            .iter()
            .map(|w| parse_weight(w.get_ref()).ok_or_else(|| ctx.at(w.span(), "weight must be a number or a ratio \"p/q\"")))
            .collect::<Result<_, _>>()?;
        let fan = WeightedFan::new(dim, rays.iter().map(|r| r.get_ref().clone()).collect(), weights)
            .map_err(|e| ctx.at(fan_raw.rays.span(), e.to_string()))?;

        if let (Some(_), Some(_)) = (&raw.perturbation, &raw.synthetic) {
            return Err(ctx.section("synthetic", "[perturbation] and [synthetic] are mutually exclusive"));
        }
        let (perturbation, perturbation_line) = if let Some(p) = &raw.perturbation {
            let modes = p.mode.iter().map(|m| convert_mode(&ctx, m, dim, false)).collect::<Result<Vec<_>, _>>()?;
            let sum = ModeSum::new(dim, tau, modes).with_decay(p.decay.unwrap_or(3.0));
            (PerturbationSpec::Modes(sum), ctx.section_line("perturbation"))
        } else if let Some(s) = &raw.synthetic {
            let sr = s;
            let b0 = sr.b0.iter().map(|m| convert_mode(&ctx, m, dim, false)).collect::<Result<Vec<_>, _>>()?;
            let b1 = sr.b1.iter().map(|m| convert_mode(&ctx, m, dim, false)).collect::<Result<Vec<_>, _>>()?;
            let mut bm = vec![Vec::new(); fan.rays().len()];
            for m in &sr.bm {
                let ray = m.ray.as_ref().ok_or_else(|| ctx.at(m.amp.span(), "synthetic.bm entries need `ray`"))?;
                if *ray.get_ref() >= bm.len() {
                    return Err(ctx.at(ray.span(), format!("ray index {} out of range (fan has {} rays)", ray.get_ref(), bm.len())));
                }
                bm[*ray.get_ref()].push(convert_mode(&ctx, m, dim, true)?);
            }
            let spec = SynthKeSpec { b0, b1, bm, decay: sr.decay, line_ke_correction: sr.line_ke_correction };
            (PerturbationSpec::Synthetic(spec), ctx.section_line("synthetic"))
        } else {
            (PerturbationSpec::None, 1)
        };

        let modes = match (ov.modes, &raw.spectral) {
            (Some(m), _) => m,
            (None, Some(s)) => *s.modes.get_ref(),
            (None, None) => 16,
        };
        if !(1..=64).contains(&modes) {
            return Err(match (ov.modes, &raw.spectral) {
                (None, Some(s)) => ctx.at(s.modes.span(), format!("spectral modes must lie in 1..=64, got {modes}")),
                _ => ConfigError::Flag(format!("--modes must lie in 1..=64, got {modes}")),
            });
        }

        let mut solver = raw.solver.clone().unwrap_or_default();
        if let Some(k) = ov.stages {
            solver.stages = k;
        }
        if let Err(e) = solver.validate() {
            return Err(match &raw.solver {
                Some(_) if ov.stages.is_none() => ctx.section("solver", e.to_string()),
                _ => ConfigError::Flag(e.to_string()),
            });
        }

        let grid = if let Some(g) = &ov.grid {
            parse_grid(g, dim).map_err(|e| ConfigError::Flag(format!("--grid: {e}")))?
        } else if let Some(g) = &raw.grid {
            match (&g.points, &g.x) {
                (Some(_), Some(_)) => return Err(ctx.section("grid", "grid takes either `points` or `x`")),
                (Some(p), None) if *p.get_ref() == 0 => return Err(ctx.at(p.span(), "grid needs at least one point per axis")),
                (Some(p), None) => GridSpec::PerAxis(*p.get_ref()),
                (None, Some(x)) => {
                    if let Some(bad) = x.get_ref().iter().find(|p| p.len() != dim) {
                        return Err(ctx.at(x.span(), format!("grid point {bad:?} has {} coordinates, expected {dim}", bad.len())));
                    }
                    GridSpec::Points(x.get_ref().clone())
                }
                (None, None) => return Err(ctx.section("grid", "grid needs `points` or `x`")),
            }
        } else {
            GridSpec::PerAxis(9)
        };

        let fiber_x = match &raw.fiber {
            Some(f) if f.x.get_ref().len() != dim => {
                return Err(ctx.at(f.x.span(), format!("fiber point has {} coordinates, expected {dim}", f.x.get_ref().len())))
            }
            Some(f) => f.x.get_ref().clone(),
            None => vec![0.0; dim],
        };
        let psi_tol = match &raw.minimal {
            Some(m) if !(*m.psi_tol.get_ref() > 0.0) => return Err(ctx.at(m.psi_tol.span(), "psi_tol must be positive")),
            Some(m) => *m.psi_tol.get_ref(),
            None => 1e-10,
        };

        Ok(RunConfig {
            path: path.to_string(),
            seed: ov.seed.or(raw.seed).unwrap_or(0),
            fan,
            recenter: fan_raw.recenter.unwrap_or(true),
            tau,
            c,
            perturbation,
            modes,
            solver,
            grid,
            fiber_x,
            psi_tol,
            fan_line: line_of(src, fan_raw.rays.span()),
            perturbation_line,
        })
    }

    pub fn load(path: Option<&str>, ov: &Overrides) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| ConfigError::Read { path: p.to_string(), message: e.to_string() })?;
                Self::parse(p, &src, ov)
            }
            None => Self::parse(BUILTIN_NAME, BUILTIN, ov),
        }
    }

    fn error_at(&self, line: usize, message: String) -> ConfigError {
        ConfigError::Invalid { path: self.path.clone(), line, message }
    }

    /// Recenters the fan and assembles the potential, checking convexity.
    pub fn build(&self) -> Result<Model, ConfigError> {
        let (fan, shift) = if self.recenter {
            recenter(&self.fan).map_err(|e| self.error_at(self.fan_line, e.to_string()))?
        } else {
            (self.fan.clone(), vec![0.0; self.fan.dim()])
        };
        let polytope = build_polytope(&fan, self.tau).map_err(|e| self.error_at(self.fan_line, e.to_string()))?;
        let toric = Arc::new(FanPotential::new(fan.clone(), self.tau));
        let per_axis = if fan.dim() == 1 { 19 } else { 9 };
        let probes = polytope.sample_region(0.9, per_axis);
        let potential = match &self.perturbation {
            PerturbationSpec::None => Ok(KahlerPotential::toric(toric)),
            PerturbationSpec::Modes(sum) => KahlerPotential::perturbed(toric, Arc::new(sum.clone()))
                .and_then(|p| check_convexity(&p, &probes, 5).map(|_| p)),
            PerturbationSpec::Synthetic(spec) => synth_ke_family(spec, toric, &fan, &probes),
        }
        .map_err(|e| self.error_at(self.perturbation_line, e.to_string()))?;
        Ok(Model { fan, shift, polytope, potential })
    }

    /// Base points of a sweep in (recentered) coordinates.
    pub fn base_points(&self, model: &Model) -> Vec<Vec<f64>> {
        match &self.grid {
            GridSpec::PerAxis(n) => model.polytope.sample_region(self.c, *n),
            GridSpec::Points(p) => p.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse("test.toml", src, &Overrides::default())
    }

    fn line(e: ConfigError) -> usize {
        match e {
            ConfigError::Invalid { line, .. } => line,
            other => panic!("expected a located error, got {other}"),
        }
    }

    const BASE: &str = "[model]\ntau = 20.0\n\n[fan]\nrays = [[1], [-1]]\nweights = [-1, \"-1/1\"]\n";

    #[test]
    fn builtin_parses_and_builds() {
        let cfg = RunConfig::load(None, &Overrides::default()).unwrap();
        assert_eq!(cfg.fan.dim(), 1);
        assert!(matches!(cfg.perturbation, PerturbationSpec::Synthetic(ref s) if s.line_ke_correction));
        cfg.build().unwrap();
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.c, 0.5);
        assert_eq!(cfg.modes, 16);
        assert_eq!(cfg.grid, GridSpec::PerAxis(9));
        assert_eq!(cfg.fan.weights(), &[-1.0, -1.0]);
    }

    #[test]
    fn malformed_ray_reports_line() {
        let src = BASE.replace("rays = [[1], [-1]]", "rays = [[1], [-1, 2]]");
        assert_eq!(line(parse(&src).unwrap_err()), 5);
        let src = BASE.replace("rays = [[1], [-1]]", "rays = [[1], [-1.5]]");
        assert_eq!(line(parse(&src).unwrap_err()), 5);
        let src = BASE.replace("rays = [[1], [-1]]", "rays = [[1], [-1 x]]");
        assert_eq!(line(parse(&src).unwrap_err()), 5);
    }

    #[test]
    fn field_errors_report_line() {
        assert_eq!(line(parse(&BASE.replace("tau = 20.0", "tau = -1.0")).unwrap_err()), 2);
        assert_eq!(line(parse(&BASE.replace("\"-1/1\"", "\"-1/0\"")).unwrap_err()), 6);
        assert_eq!(line(parse(&format!("{BASE}\n[spectral]\nmodes = 0\n")).unwrap_err()), 9);
        assert_eq!(line(parse(&format!("{BASE}\n[solver]\ntoll = 1e-8\n")).unwrap_err()), 9);
        let mode = "\n[[perturbation.mode]]\nk = [1, 2]\namp = 0.1\n";
        assert_eq!(line(parse(&format!("{BASE}{mode}")).unwrap_err()), 9);
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides { tau: Some(40.0), modes: Some(8), grid: Some("-1;0;1".into()), ..Default::default() };
        let cfg = RunConfig::parse("t", BASE, &ov).unwrap();
        assert_eq!(cfg.tau, 40.0);
        assert_eq!(cfg.modes, 8);
        assert_eq!(cfg.grid, GridSpec::Points(vec![vec![-1.0], vec![0.0], vec![1.0]]));
        let bad = Overrides { c: Some(1.5), ..Default::default() };
        assert!(matches!(RunConfig::parse("t", BASE, &bad), Err(ConfigError::Flag(_))));
    }

    #[test]
    fn unbounded_fan_is_a_config_error() {
        let src = BASE.replace("rays = [[1], [-1]]", "rays = [[1], [2]]");
        assert_eq!(line(parse(&src).unwrap_err()), 5);
        let src = BASE.replace("rays = [[1], [-1]]", "rays = [[1], [1]]");
        let err = parse(&src).and_then(|c| c.build().map(|_| ())).unwrap_err();
        assert_eq!(line(err), 5);
    }
}
