//! Adaptive estimation of the squared L2-norm of a multivariate density.
//!
//! The estimator splits a sample of size `2m` into halves, evaluates a
//! decoupled U-statistic with a high-order step kernel over a finite
//! anisotropic bandwidth grid, and picks a bandwidth with a data-driven
//! comparison rule.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod oracle;
pub mod quadrature;
pub mod rate;
pub mod selector;
pub mod sim;
pub mod ustat;

pub use error::{Error, Result};
