//! Semivariance clouds, pilot curves, parametric and nonparametric variogram
//! models, and the correlation matrices they induce.

mod bessel;
mod cloud;
mod matern;
mod matrix;
mod nnls;
mod pilot;
mod shapiro_botha;

pub use bessel::{bessel_j0, bessel_k, J0_HALF_POINT};
pub use cloud::{semivariance_cloud, CloudPair, SemivarianceCloud};
pub use matern::{matern_variogram, MaternParams};
pub use matrix::{
    cholesky_psd, correlation_from_table, correlation_matrix, cross_correlation,
    cross_correlation_matrix, PsdFactor,
};
pub use nnls::{nnls, NnlsSolution};
pub use pilot::{pilot_variogram, PilotVariogram, PILOT_GRID_SIZE, PILOT_LAG_FRACTION};
pub use shapiro_botha::{
    fit_shapiro_botha, rescale_to_unit_sill, sb_nodes, SbModel, SB_EXTENSION_FACTOR,
    SB_EXTENSION_POINTS, SB_NODES,
};

/// An isotropic semivariogram, zero at the origin.
pub trait Variogram {
    fn gamma(&self, lag: f64) -> f64;
    fn sill(&self) -> f64;
}

impl<T: Variogram + ?Sized> Variogram for &T {
    fn gamma(&self, lag: f64) -> f64 {
        (**self).gamma(lag)
    }
    fn sill(&self) -> f64 {
        (**self).sill()
    }
}
