//! Zeroth-order incremental variance reduction for composite finite sums
//! `min_x (1/n) sum_i f_i(x) + psi(x)` under function-value-only access.
//!
//! Problems are defined in [`problems`], solved by [`solver`] (or the
//! comparison methods in [`baselines`]) and checked by [`verification`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod problems;
pub mod proximal;
pub mod sampling;
pub mod solver;
pub mod verification;

pub use error::{Result, ZoError};
