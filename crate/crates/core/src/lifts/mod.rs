//! Prolongations to the tangent and cotangent bundles: vertical and complete
//! lifts, tautological forms, conormal foliations, lifted diffeomorphisms and
//! the three lifted bi-Lagrangian structures.

mod cotangent;
mod diagram;
mod structures;
mod tangent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Domain, Expr, ExprError};
use crate::geometry::{Chart, ChartRef, GeometryError};
use crate::hess::HessError;

pub use cotangent::{
    conormal_foliation, conormal_frame, cotangent_lift_diffeo, cotangent_lift_field, omega_tilde,
    tautological_and_canonical,
};
pub use diagram::{diagram_commutes, DiagramReport, FoliationInclusion};
pub use structures::{build_lifted_structure, musical_map, musical_transport, LiftedStructure};
pub use tangent::{
    lift_connection_complete, lift_field, lift_foliation_complete, lift_form, lift_scalar, lift_tensor,
    tangent_lift_diffeo, LiftKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("wrong bundle kind: {0}")]
    WrongKind(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Hess(#[from] HessError),
}

impl From<ExprError> for LiftError {
    fn from(e: ExprError) -> LiftError {
        LiftError::Geometry(GeometryError::Expr(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Tangent,
    Cotangent,
}

/// Bundle chart over a base chart: base coordinates followed by fiber
/// coordinates `v_<x>` (tangent) or `xi1…xim` (cotangent).
#[derive(Debug, Clone)]
pub struct LiftedChart {
    pub base: ChartRef,
    pub kind: BundleKind,
    pub chart: ChartRef,
}

/// Sampling bounds used for fiber coordinates.
pub const FIBER_BOUND: f64 = 1.0;

impl LiftedChart {
    pub fn new(base: &ChartRef, kind: BundleKind) -> Result<LiftedChart, LiftError> {
        let m = base.dim();
        let fibers: Vec<String> = match kind {
            BundleKind::Tangent => base.coords().iter().map(|x| format!("v_{x}")).collect(),
            BundleKind::Cotangent => (1..=m).map(|i| format!("xi{i}")).collect(),
        };
        if fibers.iter().any(|f| base.index(f).is_some()) {
            return Err(LiftError::Precondition("fiber coordinate names clash with base coordinates".into()));
        }
        let mut vars = base.coords().to_vec();
        vars.extend(fibers);
        let mut bounds = base.domain.bounds.clone();
        bounds.extend(std::iter::repeat((-FIBER_BOUND, FIBER_BOUND)).take(m));
        let mut periodic = base.domain.periodic.clone();
        periodic.extend(std::iter::repeat(false).take(m));
        let prefix = match kind {
            BundleKind::Tangent => "T",
            BundleKind::Cotangent => "T*",
        };
        let chart = Chart::new(format!("{prefix}{}", base.name), Domain::new(vars, bounds, periodic)?)?;
        Ok(LiftedChart {
            base: base.clone(),
            kind,
            chart,
        })
    }

    pub fn tangent(base: &ChartRef) -> Result<LiftedChart, LiftError> {
        LiftedChart::new(base, BundleKind::Tangent)
    }

    pub fn cotangent(base: &ChartRef) -> Result<LiftedChart, LiftError> {
        LiftedChart::new(base, BundleKind::Cotangent)
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    /// Fiber coordinate paired with base coordinate `i`.
    pub fn fiber(&self, i: usize) -> Expr {
        Expr::var(self.chart.coords()[self.base_dim() + i].clone())
    }

    pub fn fiber_index(&self, i: usize) -> usize {
        self.base_dim() + i
    }

    pub(crate) fn expect(&self, kind: BundleKind) -> Result<(), LiftError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(LiftError::WrongKind(format!("expected a {kind:?} chart, got {:?}", self.kind)))
        }
    }
}

/// Which of the three lifted structures to build: 1 = `(T*M, dθ, N*F₁, N*F₂)`,
/// 2 = `(T*M, ω̃, N*F₁, N*F₂)`, 3 = `(TM, ω^c, F₁^c, F₂^c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedStructureId(u8);

impl LiftedStructureId {
    pub fn new(i: u8) -> Result<LiftedStructureId, LiftError> {
        if (1..=3).contains(&i) {
            Ok(LiftedStructureId(i))
        } else {
            Err(LiftError::Precondition(format!("lift index must be 1, 2 or 3, got {i}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn bundle(self) -> BundleKind {
        if self.0 == 3 {
            BundleKind::Tangent
        } else {
            BundleKind::Cotangent
        }
    }
}
