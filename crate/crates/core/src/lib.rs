// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod variational;
pub mod control;
pub mod estimator;
pub mod norms;
pub mod quadrature;
pub mod config;
pub mod report;
pub mod experiment;

pub use error::{Error, Result};
