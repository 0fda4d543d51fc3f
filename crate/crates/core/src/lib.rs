//! Entropy solutions of the macroscopic incompressible porous media equation
//! for unstable two-phase data with an analytic interface.
//!
//! The level-set construction lives in [`levelset`] and [`reconstruction`];
//! [`fv`] and [`jko`] are independent schemes used to cross-check it.

// Negated comparisons reject NaN on purpose; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod fv;
pub mod initial_data;
pub mod jko;
pub mod kernel;
pub mod levelset;
pub mod quadrature;
pub mod reconstruction;
pub mod spectral;

pub use error::{Error, Result};
