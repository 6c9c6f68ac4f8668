//! Numerical solver for a two-population nonlocal-diffusion epidemic model
//! with a single moving front, plus the estimators and property harnesses
//! used to check its long-time behaviour.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discretization;
pub mod error;
pub mod evolution;
pub mod io;
pub mod kernels;
pub mod propcheck;
pub mod quadrature;
pub mod reactions;
pub mod steadystate;
pub mod sweep;

pub use error::{Error, Result};
pub use evolution::{ModelParams, Trajectory};
pub use kernels::{Family, KernelSpec};
pub use reactions::ReactionSpec;
