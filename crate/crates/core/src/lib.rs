//! Numerical laboratory for the principal-agent problem over b-convex
//! indirect utilities.

// `!(a > b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bconvex;
pub mod benefit;
pub mod config;
pub mod domain;
pub mod error;
pub mod expr;
pub mod json;
pub mod numeric;
pub mod regularity;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
