//! Invariant densities and linear response for the intermittent map family
//! `T_alpha(x) = x (1 + (2x)^alpha)` on `[0, 1/2]`, `2x - 1` on `(1/2, 1]`.
//!
//! The computation goes through the first-return map to `[1/2, 1]`, whose
//! transfer operator is discretized by Chebyshev collocation. Branch data of
//! the return map are read off backward orbits under the left branch.

pub mod asymptotic;
pub mod branches;
pub mod density;
pub mod dual;
pub mod error;
pub mod function_space;
pub mod observable;
pub mod orbit;
mod parallel;
pub mod pipeline;
pub mod quadrature;
pub mod response;
pub mod transfer;
pub mod unit_density;
pub mod verify;

pub use error::{Error, Result};
