//! Numerical laboratory for a second-order hyperbolic flow of Riemannian
//! metrics, d^2 g_ij / dt^2 = -2 Ric_ij, on flat periodic grid charts.
//!
//! The crate is organized along the pipeline the experiments use:
//! [`grid`] and [`field`] provide periodic grids and tensor fields with
//! 4th-order finite differences, [`curvature`] the discrete tensor
//! calculus, [`flow`] the right-hand-side variants and exact reference
//! solutions, [`reduction`] the first-order symmetric system and the RK4
//! integrator, [`verify`] the residual and refinement diagnostics, and
//! [`reference`] independent brute-force oracles the tests compare against.

pub mod curvature;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod reduction;
pub mod state;

pub use error::{HgfError, Result};
