//! Numerical laboratory for finite-time blow-up of the semilinear wave
//! equation `u_tt - Δu = u_t|u_t|^(p-1)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod cli;
pub mod diagnostics;
pub mod duhamel;
pub mod energy;
pub mod error;
pub mod model;
pub mod numerics;
pub mod profile;
pub mod selfsim;
pub mod solver;

pub use error::{Error, Result};
