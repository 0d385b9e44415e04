//! Charts, vector fields, differential forms and foliation frames, with the
//! pointwise checks that certify a bi-Lagrangian structure.

mod chart;
mod checks;
mod diffeo;
mod field;
mod foliation;
mod form;

use thiserror::Error;

use crate::expr::{ExprError, DEFAULT_SEED};

pub use chart::{Chart, ChartRef};
pub use checks::{
    adapted_chart_check, frobenius_check, is_lagrangian, is_symplectic, validate_bilagrangian, AdaptedReport,
    BiLagrangianReport, FrobeniusReport, LagrangianReport, SymplecticReport, SPAN_TOL,
};
pub use diffeo::{pullback_form, pushforward_field, DiffeoSpec};
pub use field::{lie_bracket, VectorField};
pub use foliation::{BiLagrangianStructure, FoliationFrame};
pub use form::{exterior_derivative, DifferentialForm, TensorField};

pub(crate) use field::same_chart;
pub(crate) use foliation::frame_matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("chart mismatch: `{0}` vs `{1}`")]
    ChartMismatch(String, String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("diffeomorphism has no inverse expression")]
    MissingInverse,
    #[error("frame has rank {rank} (expected {expected}) at {point:?}")]
    RankDeficient {
        point: Vec<f64>,
        rank: usize,
        expected: usize,
    },
    #[error("singular: {0}")]
    Singular(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// How many check points to draw and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Samples {
    pub count: usize,
    pub seed: u64,
}

impl Samples {
    pub fn new(count: usize) -> Samples {
        Samples {
            count,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(count: usize, seed: u64) -> Samples {
        Samples { count, seed }
    }

    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        chart.sample_points(self.count, self.seed)
    }
}

impl Default for Samples {
    fn default() -> Samples {
        Samples::new(50)
    }
}
