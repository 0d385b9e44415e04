//! Bi-Lagrangian structures on charts: symbolic fields and forms, Hess
//! connections, tangent/cotangent prolongations, and Cherry flows on the
//! torus with their circle maps.

pub mod expr;
pub mod geometry;
pub mod numeric;
pub mod hess;
pub mod lifts;
pub mod cherry;
pub mod io;
pub mod cli;
