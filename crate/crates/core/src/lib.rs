//! Numerical construction of H-minimal Lagrangian torus fibrations in toric
//! Kähler manifolds under bounded perturbations, and of the minimal
//! Lagrangian torus of a near-Kähler-Einstein metric.

pub mod error;
pub mod flow;
pub mod jet;
pub mod kahler;
pub mod lagrangian;
pub mod linsolve;
pub mod minimal;
pub mod models;
pub mod oracles;
mod par;
pub mod solver;
pub mod spectral;
pub mod toric;

pub use error::{Error, Result};
