//! Krylov subspace iterations: skew-Lanczos, the minimal residual method
//! for shifted skew-symmetric systems, and transpose-free QMR.

pub mod lanczos;
pub mod mrs;
pub mod tfqmr;

pub use lanczos::{deflate, skew_lanczos};
pub use mrs::{mrs_solve, mrs_solve_multi, MrsReport};
pub use tfqmr::{tfqmr, Preconditioner, Termination, TfqmrOptions, TfqmrOutcome};
