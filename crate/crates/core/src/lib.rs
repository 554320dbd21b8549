//! Numerical comparison geometry for barrier principles at infinity.
//!
//! The crate is organized bottom-up:
//!
//! - [`modelspace`]: `sn_c`, `cn_c` and the scalar Riccati comparison solution.
//! - [`spectral`]: symmetric forms and the average of the `l` smallest eigenvalues.
//! - [`ode`]: adaptive Dormand-Prince integration.
//! - [`jacobi`]: matrix Riccati and Jacobi tensors along a geodesic, focal points,
//!   bending of initial data and the comparison audit.
//! - [`barrier`]: exponential barrier functions of the distance with explicit constants.
//! - [`domains`]: model domains with closed-form distance Hessians, and test submanifolds.
//! - [`varifold`]: discrete varifolds, first variation and growth diagnostics.
//! - [`principles`]: maximum-principle constants, test fields, audits and spectrum floors.
//! - [`mesh`]: triangle meshes with a cotangent Laplacian.
//! - [`io`]: the plain-text varifold file format.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod domains;
pub mod error;
pub mod io;
pub mod jacobi;
pub mod mesh;
pub mod modelspace;
pub mod ode;
pub mod principles;
pub mod spectral;
pub mod varifold;

pub use error::{Error, Result};
pub use modelspace::ModelCurvature;
pub use spectral::SymmetricForm;
