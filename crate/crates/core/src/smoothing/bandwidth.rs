//! Bandwidth selection criteria and the simplex search over bandwidth matrices.

use nalgebra::DMatrix;

use super::lag::{LagSmoother, SortedLags};
use super::local_linear::{BandwidthMatrix, LocalLinear, SmoothingMatrix};
use super::Kernel;
use crate::error::{Error, Result};
use crate::spatial::{Bounds, Location};
use crate::variogram::SemivarianceCloud;

/// Generalized cross-validation with the denominator corrected for correlation:
/// `(1/n) sum [(y_i - mu_i) / (1 - tr(S R)/n)]^2`.
pub fn cgcv(y: &[f64], smoother: &SmoothingMatrix, rhat: &DMatrix<f64>) -> Result<f64> {
    let s = smoother.matrix();
    let n = y.len();
    assert_eq!(s.nrows(), n);
    assert_eq!(rhat.nrows(), n);
    // tr(S R) with R symmetric is the sum of the elementwise product
    let tr = s.component_mul(rhat).sum();
    let denom = 1.0 - tr / n as f64;
    if denom.abs() < 1e-10 {
        return Err(Error::DegenerateDenominator(denom));
    }
    let fitted = smoother.apply(y);
    let rss: f64 = y
        .iter()
        .zip(&fitted)
        .map(|(a, b)| ((a - b) / denom).powi(2))
        .sum();
    Ok(rss / n as f64)
}

/// CGCV criterion for the variance bandwidth; `rhat_r2` is the estimated
/// correlation matrix of the squared residuals.
pub fn cgcv_variance(
    squared_residuals: &[f64],
    smoother: &SmoothingMatrix,
    rhat_r2: &DMatrix<f64>,
) -> Result<f64> {
    cgcv(squared_residuals, smoother, rhat_r2)
}

/// Mean average squared error of a linear smoother given the true mean and
/// covariance: `|S mu - mu|^2 / n + tr(S Sigma S^t) / n`.
pub fn mase(smoother: &SmoothingMatrix, mu: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let s = smoother.matrix();
    let n = mu.len() as f64;
    let bias: f64 = smoother
        .apply(mu)
        .iter()
        .zip(mu)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let s_sigma = s * sigma;
    let var = s_sigma.component_mul(s).sum();
    (bias + var) / n
}

/// Options for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    pub rel_tol: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 200,
            rel_tol: 1e-6,
            initial_step: 0.3,
        }
    }
}

/// Derivative-free simplex minimization in three dimensions.
///
/// Non-finite objective values are treated as `+inf`. Returns the best vertex
/// and its value. Ties are broken by vertex age so a flat objective returns the
/// starting point.
pub fn nelder_mead<F>(mut f: F, x0: [f64; 3], opts: SimplexOptions) -> ([f64; 3], f64)
where
    F: FnMut(&[f64; 3]) -> f64,
{
    let evals = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64; 3]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let f0 = eval(&x0);
    simplex.push((x0, f0));
    for d in 0..3 {
        let mut x = x0;
        x[d] += opts.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let combine = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[3].1;
        let spread = worst - best;
        if (spread.is_finite() && spread <= opts.rel_tol * best.abs() + 1e-300)
            || evals.get() >= opts.max_evals
        {
            break;
        }
        let x0 = simplex[0].0;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| (0..3).map(move |d| (x[d] - x0[d]).abs()))
            .fold(0.0f64, f64::max);
        if size < 1e-12 {
            break;
        }
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for d in 0..3 {
                centroid[d] += x[d] / 3.0;
            }
        }
        let worst_x = simplex[3].0;
        let reflected = combine(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let (target, ft) = if fr < simplex[3].1 {
                (reflected, fr)
            } else {
                (worst_x, simplex[3].1)
            };
            let contracted = combine(&centroid, &target, 0.5);
            let fc = eval(&contracted);
            if fc < ft {
                simplex[3] = (contracted, fc);
            } else {
                let x_best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let x = combine(&x_best, &v.0, 0.5);
                    *v = (x, eval(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1)
}

/// Minimizes `objective` over symmetric positive-definite bandwidths,
/// searching the log-Cholesky parameterization from `init`.
pub fn select_bandwidth<F>(mut objective: F, init: BandwidthMatrix) -> Result<BandwidthMatrix>
where
    F: FnMut(&BandwidthMatrix) -> f64,
{
    let f0 = objective(&init);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let x0 = init.to_log_cholesky();
    let (best, _) = nelder_mead(
        |p| match BandwidthMatrix::from_log_cholesky(*p) {
            Ok(h) => objective(&h),
            Err(_) => f64::INFINITY,
        },
        x0,
        SimplexOptions::default(),
    );
    BandwidthMatrix::from_log_cholesky(best)
}

/// Best isotropic bandwidth among a coarse logarithmic ladder spanning 5% to
/// 100% of the larger side of the bounding box. Used to seed the simplex.
pub fn initial_bandwidth<F>(locs: &[Location], mut objective: F) -> Result<BandwidthMatrix>
where
    F: FnMut(&BandwidthMatrix) -> f64,
{
    let b = Bounds::enclosing(locs).ok_or(Error::InvalidInput("no locations".into()))?;
    let span = (b.x1_max - b.x1_min).max(b.x2_max - b.x2_min);
    if !(span > 0.0) {
        return Err(Error::InvalidInput("locations have zero extent".into()));
    }
    let steps = 12;
    let mut best: Option<(BandwidthMatrix, f64)> = None;
    for i in 0..steps {
        let frac = 0.05f64 * 20f64.powf(i as f64 / (steps - 1) as f64);
        let h = BandwidthMatrix::isotropic(span * frac)?;
        let v = objective(&h);
        if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
            best = Some((h, v));
        }
    }
    best.map(|(h, _)| h).ok_or(Error::NonFiniteObjective)
}

/// Trend bandwidth minimizing CGCV for a given correlation estimate.
pub fn select_cgcv_bandwidth(
    locs: &[Location],
    y: &[f64],
    rhat: &DMatrix<f64>,
    kernel: Kernel,
    init: Option<BandwidthMatrix>,
) -> Result<BandwidthMatrix> {
    let objective = |h: &BandwidthMatrix| {
        LocalLinear::with_kernel(*h, kernel)
            .smoothing_matrix(locs)
            .and_then(|s| cgcv(y, &s, rhat))
            .unwrap_or(f64::INFINITY)
    };
    let init = match init {
        Some(h) => h,
        None => initial_bandwidth(locs, objective)?,
    };
    select_bandwidth(objective, init)
}

/// Bandwidth minimizing MASE against a known mean and covariance.
pub fn select_mase_bandwidth(
    locs: &[Location],
    mu: &[f64],
    sigma: &DMatrix<f64>,
    kernel: Kernel,
) -> Result<BandwidthMatrix> {
    let objective = |h: &BandwidthMatrix| {
        LocalLinear::with_kernel(*h, kernel)
            .smoothing_matrix(locs)
            .map(|s| mase(&s, mu, sigma))
            .unwrap_or(f64::INFINITY)
    };
    let init = initial_bandwidth(locs, objective)?;
    select_bandwidth(objective, init)
}

/// Number of candidates in the logarithmic `h3` grid.
pub const H3_GRID_SIZE: usize = 30;

/// Leave-pair-out cross-validation relative squared error of the pilot
/// variogram at bandwidth `h`: `sum [sqdiff / (2 gamma^{-(i,j)}) - 1]^2`.
///
/// The fit being cross-validated estimates `2 gamma` directly. Returns `+inf`
/// when some leave-pair-out fit is undefined.
pub fn h3_cv_objective(sorted: &SortedLags, h: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let mean = sorted.values.iter().sum::<f64>() / n as f64;
    let floor = 1e-8 * mean.abs().max(f64::MIN_POSITIVE);
    let max = sorted.lags[n - 1];
    let tol = 1e-12 * max;
    let sm = LagSmoother::new(sorted, h);
    let mut total = 0.0;
    let mut k = 0;
    while k < n {
        let t = sorted.lags[k];
        let mut e = k + 1;
        while e < n && sorted.lags[e] - t <= tol {
            e += 1;
        }
        let sums = sm.sums_at(t);
        for m in k..e {
            match sums.without(sm.offset(m, t), sorted.values[m]).fit() {
                Some(fit) => total += (sorted.values[m] / fit.max(floor) - 1.0).powi(2),
                None => return f64::INFINITY,
            }
        }
        k = e;
    }
    total
}

/// Logarithmic grid of [`H3_GRID_SIZE`] bandwidths from the smallest to the
/// largest lag of the cloud.
pub fn h3_candidates(cloud: &SemivarianceCloud) -> Result<Vec<f64>> {
    let (lo, hi) = cloud.lag_range().ok_or_else(|| {
        Error::DegenerateCloud("fewer than two pairs".into())
    })?;
    if !(hi > lo * (1.0 + 1e-12)) || !(lo > 0.0) {
        return Err(Error::DegenerateCloud("all lags are identical".into()));
    }
    let m = H3_GRID_SIZE;
    Ok((0..m)
        .map(|i| lo * (hi / lo).powf(i as f64 / (m - 1) as f64))
        .collect())
}

/// Cross-validated `h3` over an explicit candidate list.
pub fn select_h3_on_grid(cloud: &SemivarianceCloud, candidates: &[f64]) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::DegenerateCloud("fewer than two pairs".into()));
    }
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let sorted = cloud.sorted();
    let mut best: Option<(f64, f64)> = None;
    for &h in candidates {
        let v = h3_cv_objective(&sorted, h);
        if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
            best = Some((h, v));
        }
    }
    best.map(|(h, _)| h).ok_or_else(|| {
        Error::DegenerateCloud("cross-validation undefined for every candidate bandwidth".into())
    })
}

/// Cross-validated variogram bandwidth over the default logarithmic grid.
pub fn select_h3_cv(cloud: &SemivarianceCloud) -> Result<f64> {
    let candidates = h3_candidates(cloud)?;
    select_h3_on_grid(cloud, &candidates)
}
