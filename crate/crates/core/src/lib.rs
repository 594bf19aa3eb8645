// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod hum;
pub mod linear;
pub mod nonlinear;
pub mod operator;
pub mod spectral;

pub use error::{Error, Result};
