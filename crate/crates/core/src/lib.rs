//! Two-level iterative solver for general sparse linear systems.
//!
//! A general matrix is first permuted and scaled to a unit-modulus diagonal,
//! then multiplied from the right by a sparse least-squares skew-symmetrizer
//! so that it is close to identity plus skew-symmetric. The resulting system
//! is solved with TFQMR, preconditioned by a shifted skew-symmetric operator
//! built from an incomplete `LDLᵀ` of the symmetric part. That operator is
//! inverted with an inner minimal residual iteration for shifted
//! skew-symmetric systems, after a low-rank Sherman-Morrison-Woodbury
//! correction and skew-Lanczos deflation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cholesky;
pub mod clock;
pub mod dense;
pub mod error;
pub mod gallery;
pub mod ildl;
pub mod krylov;
pub mod metrics;
pub mod mmio;
pub mod skew;
pub mod sparse;
pub mod symmetrizer;
pub mod transversal;
pub mod twolevel;

pub use error::{Error, Result};
pub use sparse::CscMatrix;
