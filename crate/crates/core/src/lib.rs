//! Nonparametric estimation of exceedance-risk maps for heteroscedastic
//! spatial data: local linear trend and variance estimation, bias-corrected
//! variogram fitting, and conditional or unconditional bootstrap.

pub mod bias;
pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod kriging;
pub mod smoothing;
pub mod sim;
pub mod spatial;
pub mod variogram;

pub use error::{Error, ErrorCategory, Result};
