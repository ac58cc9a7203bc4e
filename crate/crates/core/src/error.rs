use thiserror::Error;

/// Errors raised by the geometry stack and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid fan: {0}")]
    InvalidFan(String),
    #[error("polytope is unbounded in direction {0:?}")]
    UnboundedPolytope(Vec<f64>),
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("evaluation at or beyond the polytope boundary (max q = {0:e})")]
    BoundaryEvaluation(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("degenerate metric (smallest eigenvalue {0:e})")]
    DegenerateMetric(f64),
    #[error("perturbation amplitude too large: potential loses convexity at {0:?}")]
    AmplitudeTooLarge(Vec<f64>),
    #[error("trajectory left the region at s = {s}")]
    LeftRegion { s: f64 },
    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: f64 },
    #[error("chart degenerate (condition number {0:e})")]
    ChartDegenerate(f64),
    #[error("torus leaves the chart: {0}")]
    OutOfChart(String),
    #[error("Poisson solve did not converge (residual {0:e})")]
    PoissonNoConvergence(f64),
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("linear solve stagnated (relative residual {0:e})")]
    LinearSolveStagnation(f64),
    #[error("flow failure: {0}")]
    FlowFailure(String),
    #[error("volume function has no interior minimum: {0}")]
    NoMinimum(String),
    #[error("volume function is not convex at {0:?}")]
    NotConvex(Vec<f64>),
    #[error("root of the cohomology map not found: {0}")]
    RootNotFound(String),
    #[error("root iteration left the region at {x:?} (boundary gap {gap:e})")]
    ExitedRegion { x: Vec<f64>, gap: f64 },
    #[error("unsupported expression: {0}")]
    UnsupportedExpression(String),
    #[error("finite-difference step too small: roundoff floor reached at h = {0:e}")]
    StepTooSmall(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
