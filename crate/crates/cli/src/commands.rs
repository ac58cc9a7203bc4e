use std::cmp::Ordering;
use std::path::Path;

use lagfib::kahler::{metric_jet, FamilyParams, KahlerPotential};
use lagfib::lagrangian::forms::sup;
use lagfib::minimal::{find_minimal, log_volume, minimize_volume, MinimalStatus};
use lagfib::solver::{sweep_fibration, FiberProblem, FiberSolution};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{Model, RunConfig};
use crate::output::{conventions_json, indexed, num, read_table, run_json, Output};
use crate::CliError;

pub struct Run {
    pub cfg: RunConfig,
    pub model: Model,
    pub out: Output,
    pub quiet: bool,
}

impl Run {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn original(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.model.shift).map(|(a, b)| a + b).collect()
    }

    fn header(&self) -> Value {
        run_json(&self.cfg, &self.model.shift)
    }
}

fn l2(v: &[f64]) -> f64 {
    (v.iter().map(|a| a * a).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Largest eigenvalue of `g⁻¹ Ric` at `(x, θ = 0)` under the unscaled metric.
fn ricci_max_eigenvalue(p: &KahlerPotential, x: &[f64]) -> Result<f64, lagfib::Error> {
    let mj = metric_jet(p, x, &vec![0.0; p.dim()], 2, &FamilyParams::unscaled(p.tau(), 1.0))?;
    let ric = mj.ricci.as_ref().expect("order 2 carries Ricci");
    let l = mj.g.clone().cholesky().ok_or(lagfib::Error::DegenerateMetric(0.0))?.l();
    let li = l.try_inverse().ok_or(lagfib::Error::DegenerateMetric(0.0))?;
    let m: DMatrix<f64> = &li * ric * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn describe(run: &Run) -> Result<(), CliError> {
    let p = &run.model.potential;
    let poly = &run.model.polytope;
    let n = p.dim();
    let c = run.cfg.c;

    let ricci_points = poly.sample_region(c, if n == 1 { 9 } else { 5 });
    let mut ricci_rows = Vec::new();
    let mut all_negative = true;
    for x in &ricci_points {
        let lam = ricci_max_eigenvalue(p, x)?;
        all_negative &= lam < 0.0;
        let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
        row.push(num(lam));
        row.push((lam < 0.0).to_string());
        ricci_rows.push(row);
    }
    let mut cols = indexed("x", n);
    cols.extend(["ricci_max_eigenvalue".to_string(), "negative".to_string()]);
    run.out.table("ricci.csv", "Ricci sign samples at theta = 0", "eigenvalues of g^-1 Ric (unscaled metric, s = 1)", &run.cfg, &cols, &ricci_rows)?;

    let profile_points = poly.sample_region(c, if n == 1 { 41 } else { 11 });
    let mut rows = Vec::new();
    for x in &profile_points {
        let vp = log_volume(p, x)?;
        let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
        row.push(num(vp.u));
        row.extend(vp.grad.iter().map(|v| num(*v)));
        for i in 0..n {
            for j in i..n {
                row.push(num(vp.hess[i][j]));
            }
        }
        rows.push(row);
    }
    let mut cols = indexed("x", n);
    cols.push("u".into());
    cols.extend(indexed("du", n));
    for i in 1..=n {
        for j in i..=n {
            cols.push(format!("d2u_{i}{j}"));
        }
    }
    run.out.table("u_profile.csv", "log-volume profile u = log Vol", "x unscaled; u dimensionless (log of unscaled volume)", &run.cfg, &cols, &rows)?;

    let minimum = match minimize_volume(p, c) {
        Ok(m) => json!({ "x0": m.x0, "x0_original": run.original(&m.x0), "u0": m.u0, "grad_norm": m.grad_norm, "iterations": m.iterations, "boundary_gap": m.boundary_gap, "gap_at_least_one": m.gap_at_least_one }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let report = json!({
        "run": run.header(),
        "conventions": conventions_json(),
        "fan": { "rays": run.model.fan.rays(), "weights": run.model.fan.weights() },
        "polytope": { "vertices": poly.vertices, "bounds_tau": poly.bounds },
        "ricci_negative_on_samples": all_negative,
        "volume_minimum": minimum,
    });
    run.out.json("describe.json", &report)?;

    run.say(format!("dimension {n}, tau {}, c {}", run.cfg.tau, c));
    run.say(format!("recentering shift {:?}", run.model.shift));
    run.say(format!("polytope vertices {:?}", poly.vertices));
    run.say(format!("Ricci negative at all {} samples: {all_negative}", ricci_points.len()));
    run.say(format!("volume minimum: {minimum}"));
    Ok(())
}

fn fiber_json(run: &Run, sol: &FiberSolution) -> Value {
    json!({
        "x": sol.x,
        "x_original": run.original(&sol.x),
        "residual": sol.residual,
        "class": sol.class,
        "margin": sol.margin,
        "toric_margin": sol.toric_margin,
        "h_sup": sup(&sol.h),
        "h_rms": l2(&sol.h),
        "stages": sol.stages.len(),
        "newton_iterations": sol.stages.iter().map(|s| s.iterations).sum::<usize>(),
    })
}

pub fn solve_fiber(run: &Run) -> Result<(), CliError> {
    let x = &run.cfg.fiber_x;
    let prob = FiberProblem::new(&run.model.potential, x, run.cfg.modes)?;
    let sol = prob.solve_fiber(&run.cfg.solver)?;

    let rows: Vec<Vec<String>> = sol
        .stages
        .iter()
        .map(|s| vec![num(s.s), num(s.step), num(s.residual_jump), num(s.residual), s.iterations.to_string(), num(s.inverse_norm), num(s.lipschitz)])
        .collect();
    let cols: Vec<String> = ["s", "step", "residual_jump", "residual", "iterations", "inverse_norm", "lipschitz"].map(String::from).to_vec();
    run.out.table("stages.csv", "continuation stages", "s dimensionless; residuals sup-norm of d*alpha under tau^2 g", &run.cfg, &cols, &rows)?;

    let n = prob.dim();
    let rows: Vec<Vec<String>> = prob
        .grid
        .points()
        .iter()
        .zip(&sol.h)
        .map(|(t, h)| t.iter().map(|v| num(*v)).chain([num(*h)]).collect())
        .collect();
    let mut cols = indexed("t", n);
    cols.push("h".into());
    run.out.table("fiber_h.csv", "graph function of the solved fibre", "t in radians; h in rescaled y units", &run.cfg, &cols, &rows)?;

    let report = json!({ "run": run.header(), "conventions": conventions_json(), "fiber": fiber_json(run, &sol) });
    run.out.json("fiber.json", &report)?;
    run.say(format!("fibre over x = {x:?}: {} stages, residual {:e}", sol.stages.len(), sol.residual));
    run.say(format!("class {:?}, margin {} (toric {})", sol.class, sol.margin, sol.toric_margin));
    Ok(())
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let mut base = run.cfg.base_points(&run.model);
    base.sort_by(|a, b| a.iter().zip(b).map(|(u, v)| u.total_cmp(v)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal));
    let n = run.model.potential.dim();
    let res = sweep_fibration(&run.model.potential, &base, run.cfg.c, run.cfg.modes, &run.cfg.solver);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (x, r) in &res.fibers {
        let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
        match r {
            Ok(sol) => {
                row.push(num(sup(&sol.h)));
                row.extend(sol.class.iter().map(|v| num(*v)));
                row.extend([num(sol.margin), num(sol.toric_margin), num(sol.residual), "ok".into()]);
            }
            Err(e) => {
                row.extend(std::iter::repeat(String::new()).take(n + 4));
                row.push(e.to_string());
                failures.push(json!({ "x": x, "error": e.to_string() }));
            }
        }
        rows.push(row);
    }
    let mut cols = indexed("x", n);
    cols.push("h_sup".into());
    cols.extend(indexed("class", n));
    cols.extend(["margin", "toric_margin", "residual", "status"].map(String::from));
    run.out.table("sweep.csv", "fibration sweep", "x unscaled; h, margins and residuals under tau^2 g; class in dt_j coefficients", &run.cfg, &cols, &rows)?;

    let solved: Vec<&FiberSolution> = res.solved().collect();
    let worst = solved.iter().map(|s| s.margin / s.toric_margin).fold(f64::INFINITY, f64::min);
    let report = json!({
        "run": run.header(),
        "conventions": conventions_json(),
        "points": res.fibers.len(),
        "solved": solved.len(),
        "min_margin_ratio": if solved.is_empty() { Value::Null } else { json!(worst) },
        "failures": failures,
    });
    run.out.json("sweep.json", &report)?;
    run.say(format!("{} of {} fibres solved, smallest margin ratio {worst}", solved.len(), res.fibers.len()));
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} fibres failed; see sweep.json", failures.len())))
    }
}

pub fn find_minimal_cmd(run: &Run) -> Result<(), CliError> {
    let r = find_minimal(&run.model.potential, run.cfg.c, run.cfg.modes, &run.cfg.solver, run.cfg.psi_tol)?;
    let n = r.x1.len();
    let grid = lagfib::spectral::TorusGrid::new(n, run.cfg.modes);
    let rows: Vec<Vec<String>> = grid.points().iter().zip(&r.h).map(|(t, h)| t.iter().map(|v| num(*v)).chain([num(*h)]).collect()).collect();
    let mut cols = indexed("t", n);
    cols.push("h".into());
    run.out.table("minimal_h.csv", "graph function of the minimal torus", "t in radians; h in rescaled y units", &run.cfg, &cols, &rows)?;
    let report = json!({
        "run": run.header(),
        "conventions": conventions_json(),
        "x1_original": run.original(&r.x1),
        "report": r,
    });
    run.out.json("minimal.json", &report)?;
    run.say(format!("x0 = {:?}, x1 = {:?} after {} iterations", r.x0, r.x1, r.iterations));
    run.say(format!("|Psi| = {:e}, sup|alpha| = {:e}, classification {}", r.psi.iter().map(|v| v * v).sum::<f64>().sqrt(), r.sup_alpha, r.classification));
    match r.status {
        MinimalStatus::Minimal => Ok(()),
        MinimalStatus::NotMinimalAtRoot => Err(CliError::Failed(format!("root at {:?} is not minimal (sup|alpha| = {:e})", r.x1, r.sup_alpha))),
    }
}

const ARTIFACTS: [&str; 5] = ["describe.json", "fiber.json", "sweep.json", "minimal.json", "verify.json"];

pub fn report(dir: &Path, quiet: bool) -> Result<(), CliError> {
    let out = Output::new(dir)?;
    let mut collected = serde_json::Map::new();
    for name in ARTIFACTS {
        let path = out.path(name);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })?;
        collected.insert(name.trim_end_matches(".json").to_string(), value);
    }
    let mut tables = serde_json::Map::new();
    for name in ["ricci.csv", "u_profile.csv", "stages.csv", "sweep.csv", "fiber_h.csv", "minimal_h.csv", "verify.csv"] {
        let path = out.path(name);
        if path.exists() {
            let (cols, rows) = read_table(&path).map_err(|message| CliError::Output { path: path.display().to_string(), message })?;
            tables.insert(name.to_string(), json!({ "columns": cols, "rows": rows.len() }));
        }
    }
    if collected.is_empty() && tables.is_empty() {
        return Err(CliError::Failed(format!("no artifacts found in {}", dir.display())));
    }
    let mut lines = vec![format!("summary of {}", dir.display())];
    if let Some(v) = collected.get("describe") {
        lines.push(format!("describe: Ricci negative on samples {}, volume minimum {}", v["ricci_negative_on_samples"], v["volume_minimum"]["x0"]));
    }
    if let Some(v) = collected.get("fiber") {
        lines.push(format!("solve-fiber: x {} residual {} margin {}", v["fiber"]["x"], v["fiber"]["residual"], v["fiber"]["margin"]));
    }
    if let Some(v) = collected.get("sweep") {
        lines.push(format!("sweep: {} of {} solved, min margin ratio {}", v["solved"], v["points"], v["min_margin_ratio"]));
    }
    if let Some(v) = collected.get("minimal") {
        lines.push(format!("find-minimal: x1 {} status {} classification {}", v["report"]["x1"], v["report"]["status"], v["report"]["classification"]));
    }
    if let Some(v) = collected.get("verify") {
        lines.push(format!("verify: {} of {} checks passed", v["passed"], v["total"]));
    }
    for (k, v) in &tables {
        lines.push(format!("table {k}: {} rows", v["rows"]));
    }
    let summary = json!({ "artifacts": collected, "tables": tables, "summary": lines });
    out.json("summary.json", &summary)?;
    std::fs::write(out.path("summary.txt"), lines.join("\n") + "\n").map_err(|e| CliError::Output { path: out.path("summary.txt").display().to_string(), message: e.to_string() })?;
    if !quiet {
        for l in &lines {
            println!("{l}");
        }
    }
    Ok(())
}
