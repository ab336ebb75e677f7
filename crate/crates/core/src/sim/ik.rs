use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kriging::OrdinaryKriging;
use crate::spatial::{Location, SpatialSample};
use crate::variogram::{nnls, Variogram};

pub const IK_BINS: usize = 15;
const RANGE_GRID: usize = 60;

/// Exponential semivariogram `c0 + c1 (1 - exp(-3h/a))`, zero at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialModel {
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
}

impl Variogram for ExponentialModel {
    fn gamma(&self, lag: f64) -> f64 {
        if lag <= 0.0 {
            0.0
        } else {
            self.nugget + self.partial_sill * (1.0 - (-3.0 * lag / self.range).exp())
        }
    }

    fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }
}

/// Matheron estimator on equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedVariogram {
    pub centers: Vec<f64>,
    pub gamma: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Empirical semivariogram of `values` on `bins` equal-width bins covering
/// `(0, max_lag / 2]`. Empty bins are dropped.
pub fn binned_variogram(locs: &[Location], values: &[f64], bins: usize) -> Result<BinnedVariogram> {
    let n = locs.len();
    let mut max_lag: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_lag = max_lag.max(locs[i].distance(&locs[j]));
        }
    }
    if !(max_lag > 0.0) || bins == 0 {
        return Err(Error::DegenerateCloud("no positive lags".into()));
    }
    let cutoff = 0.5 * max_lag;
    let width = cutoff / bins as f64;
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..n {
        for j in (i + 1)..n {
            let h = locs[i].distance(&locs[j]);
            if h <= 0.0 || h > cutoff {
                continue;
            }
            let k = ((h / width).ceil() as usize).clamp(1, bins) - 1;
            sum[k] += (values[i] - values[j]).powi(2);
            count[k] += 1;
        }
    }
    let mut out = BinnedVariogram { centers: vec![], gamma: vec![], counts: vec![] };
    for k in 0..bins {
        if count[k] > 0 {
            out.centers.push((k as f64 + 0.5) * width);
            out.gamma.push(sum[k] / (2.0 * count[k] as f64));
            out.counts.push(count[k]);
        }
    }
    if out.centers.is_empty() {
        return Err(Error::DegenerateCloud("all variogram bins are empty".into()));
    }
    Ok(out)
}

/// Weighted least-squares exponential fit with bin-count weights.
///
/// For each range on a logarithmic grid the nugget and partial sill solve a
/// two-variable nonnegative least-squares problem; the range with the
/// smallest weighted residual wins.
pub fn fit_exponential(v: &BinnedVariogram) -> ExponentialModel {
    let m = v.centers.len();
    let last = v.centers[m - 1];
    let (lo, hi) = (0.1 * last, 10.0 * last);
    let w: Vec<f64> = v.counts.iter().map(|&c| (c as f64).sqrt()).collect();
    let b = DVector::from_fn(m, |i, _| w[i] * v.gamma[i]);
    let mut best: Option<(f64, ExponentialModel)> = None;
    for g in 0..RANGE_GRID {
        let a = lo * (hi / lo).powf(g as f64 / (RANGE_GRID - 1) as f64);
        let design = DMatrix::from_fn(m, 2, |i, j| {
            if j == 0 {
                w[i]
            } else {
                w[i] * (1.0 - (-3.0 * v.centers[i] / a).exp())
            }
        });
        let sol = nnls(&design, &b, 1e-10, 500);
        let sse = (&design * &sol.x - &b).norm_squared();
        let model = ExponentialModel { nugget: sol.x[0], partial_sill: sol.x[1], range: a };
        if best.is_none_or(|(s, _)| sse < s) {
            best = Some((sse, model));
        }
    }
    best.expect("nonempty range grid").1
}

/// Indicator kriging output: ordinary kriging predictions as computed and
/// clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub raw: Vec<f64>,
    pub clamped: Vec<f64>,
    /// `None` when the indicators were constant.
    pub model: Option<ExponentialModel>,
}

/// Exceedance probabilities by ordinary kriging of `1{Y >= c}` under a fitted
/// exponential indicator variogram and constant mean.
pub fn ik_baseline(sample: &SpatialSample, targets: &[Location], c: f64) -> Result<IkResult> {
    let ind: Vec<f64> =
        sample.values().iter().map(|&y| if y >= c { 1.0 } else { 0.0 }).collect();
    let ones = ind.iter().filter(|&&v| v == 1.0).count();
    let constant = |p: f64| IkResult {
        raw: vec![p; targets.len()],
        clamped: vec![p; targets.len()],
        model: None,
    };
    if ones == 0 || ones == ind.len() {
        return Ok(constant(if ones == 0 { 0.0 } else { 1.0 }));
    }
    let locs = sample.locations();
    let model = fit_exponential(&binned_variogram(locs, &ind, IK_BINS)?);
    if !(model.sill() > 0.0) {
        return Ok(constant(ones as f64 / ind.len() as f64));
    }
    let ok = OrdinaryKriging::new(locs, &model)?;
    let raw = targets.iter().map(|t| ok.predict(&ind, t)).collect::<Result<Vec<f64>>>()?;
    let clamped = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    Ok(IkResult { raw, clamped, model: Some(model) })
}
