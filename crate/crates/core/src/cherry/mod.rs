//! Cherry flows on the torus: the field family, singularity classification,
//! adaptive integration, first-return circle maps with their flat pieces and
//! critical exponents, gluing, conjugation, and the Hess connection of a
//! transversal Cherry pair.

mod circle;
mod connection;
mod field;
mod ode;
mod return_map;
mod singular;

use thiserror::Error;

use crate::expr::ExprError;
use crate::geometry::GeometryError;
use crate::hess::HessError;

pub use circle::{
    analyze_flat, conjugate_map, glue_maps, rotation_number, CircleDiffeo, CircleMap, CircleMapSample, Conjugated,
    ExponentEstimate, FlatAnalysis, FlatPiece, Glued, RotationEstimate, SyntheticCherryMap, FIT_RANGE,
};
pub use connection::{
    cherry_pair_hess, well_definedness_sample, CandidateOutcome, CherryConnection, WellDefinednessReport,
    EXCLUSION_RADIUS,
};
pub use field::{make_cherry_field, CherryField, CherryParams, PlanarField, PushedField, TorusMap};
pub use ode::{flow, FlowStatus, Trajectory};
pub use return_map::{
    equivariance_check, first_return_map, EquivarianceReport, ReturnMap, ReturnOptions, CAPTURE_RADIUS,
    EQUIVARIANCE_TOL,
};
pub use singular::{classify_singularities, Singularity, SingularityKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CherryError {
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("not a Cherry field: {reason}")]
    Rejected { reason: String, zeros: usize },
    #[error("Newton failed to converge near {0:?}")]
    NoConvergence([f64; 2]),
    #[error("grid of {0} points is too small (need at least 64)")]
    GridTooSmall(usize),
    #[error("field not generating a Cherry map: {captured} of {grid} grid points captured")]
    NotCherry { captured: usize, grid: usize },
    #[error("no flat piece: {0}")]
    NoFlatPiece(String),
    #[error("map is not monotone near x = {0}")]
    NonMonotone(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Hess(#[from] HessError),
}

impl From<ExprError> for CherryError {
    fn from(e: ExprError) -> CherryError {
        CherryError::Geometry(GeometryError::Expr(e))
    }
}
