//! Hess connections of bi-Lagrangian structures: construction in the adapted
//! frame `F1 ++ F2`, torsion, curvature, push-forward and verification.

mod construct;
mod table;
mod verify;

use thiserror::Error;

use crate::expr::ExprError;
use crate::geometry::GeometryError;

pub use construct::{hess_connection, pushforward_connection, pushforward_structure};
pub use table::{invert_symbolic, ConnectionTable};
pub use verify::{compare_tables, hess_verify, uniqueness_probe, HessReport, HESS_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HessError {
    #[error("structure is not bi-Lagrangian: {0}")]
    NotBiLagrangian(String),
    #[error("{what} is singular at {point:?}")]
    Singular { what: String, point: Vec<f64> },
    #[error("frame expansion residual {residual:e} at {point:?}")]
    Expansion { residual: f64, point: Vec<f64> },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<ExprError> for HessError {
    fn from(e: ExprError) -> HessError {
        HessError::Geometry(GeometryError::Expr(e))
    }
}
