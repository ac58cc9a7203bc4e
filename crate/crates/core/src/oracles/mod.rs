//! Independent ground truth for the geometry stack: parametric product tori
//! in flat space, truncated power series for one-variable potentials, and
//! finite-difference deformation checks.

mod deform;
mod flat;
mod series;

pub use deform::{fd_deform, random_band_limited, Quantity};
pub use flat::{flat_torus_oracle, FlatTorus, FLAT_METRIC_FACTOR};
pub use series::{symbolic_1d, Series, Symbolic1d};

use serde::Serialize;

/// Outcome of comparing a library quantity against an oracle.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: Vec<f64>,
    pub library: Vec<f64>,
    /// Step sizes for finite-difference oracles, empty otherwise.
    pub steps: Vec<f64>,
    /// Relative error at each step (or a single entry).
    pub errors: Vec<f64>,
    /// `log₂` of successive error ratios under step halving.
    pub order: Option<f64>,
}

impl OracleReport {
    pub fn error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }

    /// Successive error ratios `e_i / e_{i+1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }
}
