use nalgebra::DMatrix;

use super::{bias_matrix, corrected_cloud, covariance_to_correlation, debiased_squares};
use super::{residual_covariance, squared_residual_cov_normal};
use crate::error::{Error, Result};
use crate::smoothing::{
    select_cgcv_bandwidth, select_h3_cv, BandwidthMatrix, Kernel, LocalLinear, NonnegativeSmoother,
    SmoothingMatrix,
};
use crate::spatial::{LagTable, Location, SpatialSample};
use crate::variogram::{
    correlation_from_table, fit_shapiro_botha, pilot_variogram, rescale_to_unit_sill,
    semivariance_cloud, PilotVariogram, SbModel, SemivarianceCloud, Variogram,
};

/// How a bandwidth matrix is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    /// Minimize (C)GCV.
    Auto,
    Fixed(BandwidthMatrix),
}

/// How the variogram smoothing bandwidth is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagBandwidth {
    /// Leave-pair-out cross-validation on a logarithmic grid.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub trend: BandwidthChoice,
    pub variance: BandwidthChoice,
    pub h3: LagBandwidth,
    pub kernel: Kernel,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            trend: BandwidthChoice::Auto,
            variance: BandwidthChoice::Auto,
            h3: LagBandwidth::Auto,
            kernel: Kernel::Triweight,
            max_iter: 10,
            tol: 1e-3,
        }
    }
}

/// Joint nonparametric fit of trend, variance and dependence.
#[derive(Debug, Clone)]
pub struct FittedComponents {
    pub locations: Vec<Location>,
    pub targets: Vec<Location>,
    pub values: Vec<f64>,
    pub trend: Vec<f64>,
    pub trend_targets: Vec<f64>,
    /// First-stage variance at the sample locations.
    pub pilot_variance: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_targets: Vec<f64>,
    /// Unit-sill model fitted to the uncorrected standardized residuals.
    pub pilot_variogram: SbModel,
    /// Unit-sill model after bias correction.
    pub variogram: SbModel,
    pub residuals: Vec<f64>,
    /// Residuals divided by the first-stage standard deviations.
    pub std_residuals: Vec<f64>,
    pub trend_smoother: SmoothingMatrix,
    pub variance_smoother: SmoothingMatrix,
    pub bias: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trend_bandwidth: BandwidthMatrix,
    pub variance_bandwidth: BandwidthMatrix,
    pub lag_bandwidth: f64,
    pub variance_floor: f64,
}

impl FittedComponents {
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    /// Sample locations followed by targets.
    pub fn all_locations(&self) -> Vec<Location> {
        self.locations.iter().chain(&self.targets).copied().collect()
    }

    pub fn all_trend(&self) -> Vec<f64> {
        self.trend.iter().chain(&self.trend_targets).copied().collect()
    }

    pub fn all_sd(&self) -> Vec<f64> {
        self.variance.iter().chain(&self.variance_targets).map(|v| v.sqrt()).collect()
    }

    pub fn pilot_sd(&self) -> Vec<f64> {
        self.pilot_variance.iter().map(|v| v.sqrt()).collect()
    }
}

/// Residuals no larger than this, relative to the data, are rounding noise.
const RESIDUAL_NOISE: f64 = 1e-10;

struct PilotStage {
    smoother: SmoothingMatrix,
    residuals: Vec<f64>,
    r2: Vec<f64>,
    variance: Vec<f64>,
    std_residuals: Vec<f64>,
    h3: f64,
    pilot: PilotVariogram,
    model: SbModel,
}

fn pilot_stage(
    locs: &[Location],
    y: &[f64],
    trend: &LocalLinear,
    var_bw: Option<BandwidthMatrix>,
    cfg: &FitConfig,
    floor: f64,
) -> Result<(PilotStage, BandwidthMatrix)> {
    let smoother = trend.smoothing_matrix(locs)?;
    let fitted = smoother.apply(y);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    // Data the trend reproduces exactly (constants, planes) leave only
    // rounding noise, which has no variance or dependence to estimate.
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spread = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(spread > RESIDUAL_NOISE * scale) {
        return Err(Error::DegenerateResiduals);
    }
    let r2: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    let h2 = match var_bw {
        Some(h) => h,
        None => select_cgcv_bandwidth(locs, &r2, &DMatrix::identity(locs.len(), locs.len()), cfg.kernel, None)?,
    };
    let variance =
        NonnegativeSmoother::new(&LocalLinear::with_kernel(h2, cfg.kernel), locs, locs, floor)?
            .apply(&r2);
    let std_residuals: Vec<f64> = residuals.iter().zip(&variance).map(|(r, v)| r / v.sqrt()).collect();
    let cloud = semivariance_cloud(&std_residuals, locs);
    let h3 = match cfg.h3 {
        LagBandwidth::Fixed(h) => h,
        LagBandwidth::Auto => select_h3_cv(&cloud)?,
    };
    let (pilot, model) = fit_cloud(&cloud, h3)?;
    let stage = PilotStage { smoother, residuals, r2, variance, std_residuals, h3, pilot, model };
    Ok((stage, h2))
}

fn fit_cloud(cloud: &SemivarianceCloud, h3: f64) -> Result<(PilotVariogram, SbModel)> {
    let pilot = pilot_variogram(cloud, h3)?;
    let model = rescale_to_unit_sill(&fit_shapiro_botha(&pilot)?)?;
    Ok((pilot, model))
}

fn diag_scale(m: &mut DMatrix<f64>, sd: &[f64]) {
    let n = sd.len();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= sd[i] * sd[j];
        }
    }
}

/// Estimates trend, variance and a bias-corrected variogram from a sample.
///
/// With automatic bandwidths, the trend and variance bandwidths are first
/// chosen by ordinary GCV, then re-chosen by CGCV using the correlation
/// implied by the first variogram fit. All bandwidths are then held fixed
/// while the variance and variogram are corrected iteratively.
pub fn fit_components(
    sample: &SpatialSample,
    targets: &[Location],
    cfg: &FitConfig,
) -> Result<FittedComponents> {
    let locs = sample.locations();
    let y = sample.values();
    let n = locs.len();
    let floor = (1e-6 * sample.value_variance()).max(f64::MIN_POSITIVE);
    let table = LagTable::new(locs);

    let mut h = match cfg.trend {
        BandwidthChoice::Fixed(h) => h,
        BandwidthChoice::Auto => {
            select_cgcv_bandwidth(locs, y, &DMatrix::identity(n, n), cfg.kernel, None)?
        }
    };
    let fixed_var = match cfg.variance {
        BandwidthChoice::Fixed(h2) => Some(h2),
        BandwidthChoice::Auto => None,
    };
    let (mut stage, mut h2) =
        pilot_stage(locs, y, &LocalLinear::with_kernel(h, cfg.kernel), fixed_var, cfg, floor)?;

    let auto_trend = matches!(cfg.trend, BandwidthChoice::Auto);
    if auto_trend || fixed_var.is_none() {
        let r0 = correlation_from_table(&table, &stage.model);
        if auto_trend {
            h = select_cgcv_bandwidth(locs, y, &r0, cfg.kernel, Some(h))?;
        }
        if fixed_var.is_none() {
            let smoother = LocalLinear::with_kernel(h, cfg.kernel).smoothing_matrix(locs)?;
            let fitted = smoother.apply(y);
            let r2: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).collect();
            let mut sigma0 = r0;
            let sd0: Vec<f64> = stage.variance.iter().map(|v| v.sqrt()).collect();
            diag_scale(&mut sigma0, &sd0);
            let sigma_r = residual_covariance(&smoother, &sigma0);
            let rr2 = covariance_to_correlation(&squared_residual_cov_normal(&sigma_r));
            h2 = select_cgcv_bandwidth(locs, &r2, &rr2, cfg.kernel, Some(h2))?;
        }
        stage = pilot_stage(locs, y, &LocalLinear::with_kernel(h, cfg.kernel), Some(h2), cfg, floor)?.0;
    }

    let trend_ll = LocalLinear::with_kernel(h, cfg.kernel);
    let var_ll = LocalLinear::with_kernel(h2, cfg.kernel);
    let all: Vec<Location> = locs.iter().chain(targets).copied().collect();
    let w2 = NonnegativeSmoother::new(&var_ll, locs, &all, floor)?;
    let variance_smoother = SmoothingMatrix(w2.linear.rows(0, n).into_owned());
    let smooth_var = |z: &[f64]| w2.apply(z);

    let trend_all = trend_ll.smooth_at(locs, y, &all)?;
    let mut var_all = smooth_var(&stage.r2);
    let mut model = stage.model.clone();
    let grid: Vec<f64> = stage.pilot.grid.iter().copied().filter(|&g| g > 0.0).collect();
    let mut bias = DMatrix::zeros(n, n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let sd: Vec<f64> = var_all[..n].iter().map(|v| v.sqrt()).collect();
        let mut sigma = correlation_from_table(&table, &model);
        diag_scale(&mut sigma, &sd);
        bias = bias_matrix(&sd, &stage.smoother, &sigma);
        let new_var = smooth_var(&debiased_squares(&stage.r2, &bias));
        let eps: Vec<f64> = stage.residuals.iter().zip(&sd).map(|(r, s)| r / s).collect();
        let cloud = corrected_cloud(&semivariance_cloud(&eps, locs), &bias);
        let (_, new_model) = fit_cloud(&cloud, stage.h3)?;
        let dvar = var_all
            .iter()
            .zip(&new_var)
            .map(|(a, b)| (a - b).abs() / a.abs())
            .fold(0.0, f64::max);
        let dgam = grid
            .iter()
            .map(|&g| (model.gamma(g) - new_model.gamma(g)).abs())
            .fold(0.0, f64::max);
        var_all = new_var;
        model = new_model;
        log::debug!(
            "bias-correction iteration {iterations}: dvar {dvar:.3e}, dgamma {dgam:.3e}, var [{:.3e}, {:.3e}], b_ii [{:.3e}, {:.3e}]",
            var_all.iter().copied().fold(f64::INFINITY, f64::min),
            var_all.iter().copied().fold(0.0, f64::max),
            bias.diagonal().min(),
            bias.diagonal().max(),
        );
        if dvar.max(dgam) < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(FittedComponents {
        locations: locs.to_vec(),
        targets: targets.to_vec(),
        values: y.to_vec(),
        trend: trend_all[..n].to_vec(),
        trend_targets: trend_all[n..].to_vec(),
        pilot_variance: stage.variance,
        variance: var_all[..n].to_vec(),
        variance_targets: var_all[n..].to_vec(),
        pilot_variogram: stage.model,
        variogram: model,
        residuals: stage.residuals,
        std_residuals: stage.std_residuals,
        trend_smoother: stage.smoother,
        variance_smoother,
        bias,
        iterations,
        converged,
        trend_bandwidth: h,
        variance_bandwidth: h2,
        lag_bandwidth: stage.h3,
        variance_floor: floor,
    })
}
