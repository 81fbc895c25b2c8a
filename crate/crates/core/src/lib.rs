//! Generalized multiscale finite elements (GMsFEM) for two-dimensional linear
//! elasticity in heterogeneous, high-contrast media.
//!
//! The pipeline runs fine reference solve, local snapshot spaces, local spectral
//! reduction, and global coupling (continuous Galerkin or interior-penalty
//! discontinuous Galerkin), then measures errors against the fine solution.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coarse;
pub mod coeff;
pub mod coupling_cg;
pub mod coupling_dg;
pub mod error;
pub mod fem;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
