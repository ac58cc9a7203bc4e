//! Candidate Lagrangian tori: charts, graph tori, induced geometry, the mean
//! curvature form, its Hodge decomposition, and its variations.

pub mod chart;
pub mod forms;
pub mod geometry;
pub mod hodge;
pub mod variation;

pub use chart::{embed, make_chart, FiberChart, GraphTorus, Immersion};
pub use forms::{OneForm, TorusMetric};
pub use geometry::{mean_curvature_form, second_fundamental, GeometrySample};
pub use hodge::{hodge_decompose, Classification, HodgeSplit, HodgeTolerances};
pub use variation::{alpha_dot, d_operator, first_variation};
