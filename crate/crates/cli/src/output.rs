//! Tables and reports written to the output directory.
//!
//! Every CSV file starts with `#`-prefixed header lines (`# key: value`)
//! naming the table, its units and the conventions in force, followed by a
//! regular CSV header row. JSON reports carry the same information under
//! `"conventions"`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const CONVENTIONS: [(&str, &str); 6] = [
    ("coordinates", "z_j = exp((x_j + i theta_j)/2), fibre angle t_j = theta_j/2 in [0, 2 pi)"),
    ("kahler_form", "omega = i ddbar phi; the flat potential sum exp(x_j) gives twice the Euclidean metric"),
    ("rescaling", "solver metrics are tau^2 g; x and class coordinates are unscaled"),
    ("mean_curvature_form", "alpha = omega(H, .), d* = -div, Laplacian d*d"),
    ("einstein_constant", "-1"),
    ("fourier", "2N+1 equispaced points per axis"),
];

pub fn conventions_json() -> Value {
    Value::Object(CONVENTIONS.iter().map(|(k, v)| (k.to_string(), Value::String(v.to_string()))).collect())
}

/// Parameters shared by every artifact of a run.
pub fn run_json(cfg: &RunConfig, shift: &[f64]) -> Value {
    json!({
        "config": cfg.path,
        "dimension": cfg.fan.dim(),
        "tau": cfg.tau,
        "c": cfg.c,
        "modes": cfg.modes,
        "seed": cfg.seed,
        "recentering_shift": shift,
    })
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.display().to_string(), message: e.to_string() })?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes a table with header lines `table`, `units` and the conventions.
    pub fn table(&self, name: &str, table: &str, units: &str, cfg: &RunConfig, columns: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut out = format!("# table: {table}\n# units: {units}\n# tau: {}\n# c: {}\n# modes: {}\n", cfg.tau, cfg.c, cfg.modes);
        for (k, v) in CONVENTIONS {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).expect("in-memory write");
        for r in rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"));
        self.write(name, out.as_bytes())
    }
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Reads a table written by [`Output::table`], skipping the header lines.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}
