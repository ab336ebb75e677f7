//! Local linear smoothing of trends, variances and semivariances, with the
//! bandwidth selectors that drive them.

mod bandwidth;
mod kernel;
pub mod lag;
mod local_linear;

pub use bandwidth::{
    cgcv, cgcv_variance, h3_candidates, h3_cv_objective, initial_bandwidth, mase, nelder_mead,
    select_bandwidth, select_cgcv_bandwidth, select_h3_cv, select_h3_on_grid,
    select_mase_bandwidth, SimplexOptions, H3_GRID_SIZE,
};
pub use kernel::{triweight_kernel_2d, Kernel};
pub use local_linear::{
    smooth_at, smoother_vector, smoothing_matrix, variance_pilot, BandwidthMatrix, LocalLinear,
    NonnegativeSmoother, SmootherVector, SmoothingMatrix, LOCAL_CONSTANT_SHARE,
};
