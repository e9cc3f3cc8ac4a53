//! H(div)-conforming discretization of Biot's linear consolidation model.
//!
//! Fluid flux and solid displacement both live in Raviart–Thomas spaces on a
//! Cartesian mesh of the unit square; the pressure lives in the matching
//! discontinuous `Q_k` space. Elasticity uses symmetric interior penalty
//! terms, so the discrete mass balance holds pointwise in every cell.

pub mod element;
pub mod error;
pub mod fespace;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod stepper;
pub mod verification;

pub use error::{Error, Result};
