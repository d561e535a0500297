// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ansatz;
pub mod config;
pub mod error;
pub mod evolver;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod report;
pub mod sweep;
mod tridiag;

pub use error::{Error, Result};
