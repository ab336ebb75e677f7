use nalgebra::{DMatrix, DVector};

use super::bessel::{bessel_j0, J0_HALF_POINT};
use super::nnls::nnls;
use super::pilot::PilotVariogram;
use super::Variogram;
use crate::error::{Error, Result};

/// Number of Bessel basis functions.
pub const SB_NODES: usize = 50;
const NNLS_TOL: f64 = 1e-10;
/// The fit grid runs to this multiple of the pilot's largest lag.
pub const SB_EXTENSION_FACTOR: f64 = 3.0;
/// Extra grid points past the pilot's largest lag.
pub const SB_EXTENSION_POINTS: usize = 50;

/// Isotropic variogram in the plane built from a nugget and nonnegative
/// combinations of `1 - J0(t h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbModel {
    pub nugget: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SbModel {
    pub fn new(nugget: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidInput("nodes and weights differ in length".into()));
        }
        if !(nugget >= 0.0 && nugget.is_finite())
            || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || nodes.iter().any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return Err(Error::InvalidInput("model coefficients must be nonnegative and nodes positive".into()));
        }
        Ok(Self { nugget, nodes, weights })
    }

    /// A pure nugget with the given sill.
    pub fn pure_nugget(sill: f64) -> Self {
        Self { nugget: sill, nodes: Vec::new(), weights: Vec::new() }
    }

    /// Value of the continuous part, i.e. without the nugget jump.
    pub fn structured(&self, lag: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&t, &w)| w * (1.0 - bessel_j0(t * lag)))
            .sum()
    }
}

impl Variogram for SbModel {
    fn gamma(&self, lag: f64) -> f64 {
        if lag <= 0.0 {
            0.0
        } else {
            self.nugget + self.structured(lag)
        }
    }

    fn sill(&self) -> f64 {
        self.nugget + self.weights.iter().sum::<f64>()
    }
}

/// Log-spaced nodes whose basis functions reach half their sill between the
/// smallest and largest lag.
pub fn sb_nodes(min_lag: f64, max_lag: f64, k: usize) -> Vec<f64> {
    let hi = J0_HALF_POINT / min_lag;
    let lo = J0_HALF_POINT / max_lag;
    if k == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..k).map(|j| lo * (r * j as f64 / (k - 1) as f64).exp()).collect()
}

/// Nonnegative least-squares fit of a nugget plus Bessel basis to the pilot
/// curve on its positive grid points, extended with the clamped pilot value
/// up to [`SB_EXTENSION_FACTOR`] times its largest lag.
pub fn fit_shapiro_botha(pilot: &PilotVariogram) -> Result<SbModel> {
    let mut pts: Vec<(f64, f64)> = pilot.positive_support().collect();
    if pts.is_empty() || !(pilot.max_lag > 0.0) {
        return Err(Error::EmptyPilot);
    }
    // The pilot is flat beyond its last lag. Fitting that flat stretch too
    // keeps the slowest Bessel terms from dipping back down at lags that
    // kriging still uses.
    let last = pilot.values[pilot.values.len() - 1];
    for g in 1..=SB_EXTENSION_POINTS {
        let frac = g as f64 / SB_EXTENSION_POINTS as f64;
        pts.push((pilot.max_lag * (1.0 + (SB_EXTENSION_FACTOR - 1.0) * frac), last));
    }
    let min_lag = if pilot.min_lag > 0.0 && pilot.min_lag < pilot.max_lag {
        pilot.min_lag
    } else {
        pts[0].0
    };
    let nodes = sb_nodes(min_lag, pilot.max_lag, SB_NODES);
    let a = DMatrix::from_fn(pts.len(), SB_NODES + 1, |g, j| {
        if j == 0 {
            1.0
        } else {
            1.0 - bessel_j0(nodes[j - 1] * pts[g].0)
        }
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = nnls(&a, &b, NNLS_TOL, 10 * SB_NODES);
    if !sol.converged {
        log::warn!("variogram fit stopped at the iteration cap");
    }
    Ok(SbModel {
        nugget: sol.x[0],
        nodes,
        weights: sol.x.iter().skip(1).copied().collect(),
    })
}

/// Divides all coefficients by the sill.
pub fn rescale_to_unit_sill(model: &SbModel) -> Result<SbModel> {
    let sill = model.sill();
    if !(sill > 0.0 && sill.is_finite()) {
        return Err(Error::ZeroSill);
    }
    Ok(SbModel {
        nugget: model.nugget / sill,
        nodes: model.nodes.clone(),
        weights: model.weights.iter().map(|w| w / sill).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::{matern_variogram, MaternParams, PILOT_GRID_SIZE};

    fn pilot_from(f: impl Fn(f64) -> f64, min_lag: f64, max_lag: f64) -> PilotVariogram {
        let m = PILOT_GRID_SIZE;
        let grid: Vec<f64> = (0..m).map(|g| max_lag * g as f64 / (m - 1) as f64).collect();
        let values = grid.iter().map(|&h| f(h)).collect();
        PilotVariogram { grid, values, bandwidth: 0.1, min_lag, max_lag }
    }

    #[test]
    fn pure_nugget_pilot() {
        let m = fit_shapiro_botha(&pilot_from(|_| 1.0, 0.05, 1.4)).unwrap();
        assert!((m.nugget - 1.0).abs() < 1e-3, "{}", m.nugget);
        assert!(m.weights.iter().sum::<f64>() < 1e-3);
    }

    #[test]
    fn matern_pilot_is_tracked() {
        let p = MaternParams::new(0.0, 0.6, 0.5).unwrap();
        let max_lag = 2f64.sqrt();
        let step = max_lag / (PILOT_GRID_SIZE - 1) as f64;
        let pilot = pilot_from(|h| matern_variogram(h, &p), step, max_lag);
        let m = fit_shapiro_botha(&pilot).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=400 {
            let h = 0.05 + (pilot.max_lag - 0.05) * k as f64 / 400.0;
            worst = worst.max((m.gamma(h) - matern_variogram(h, &p)).abs());
        }
        assert!(worst < 0.02, "sup error {worst}");
        assert!(m.weights.iter().all(|&w| w >= 0.0) && m.nugget >= 0.0);
    }

    #[test]
    fn zero_pilot() {
        let m = fit_shapiro_botha(&pilot_from(|_| 0.0, 0.05, 1.0)).unwrap();
        assert_eq!(m.nugget, 0.0);
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!(matches!(rescale_to_unit_sill(&m), Err(Error::ZeroSill)));
    }

    #[test]
    fn rescaling() {
        let m = SbModel::new(0.5, vec![1.0, 3.0], vec![1.0, 0.5]).unwrap();
        let r = rescale_to_unit_sill(&m).unwrap();
        assert_eq!((r.nugget, r.weights.clone()), (0.25, vec![0.5, 0.25]));
        assert_eq!(rescale_to_unit_sill(&r).unwrap(), r);
    }

    #[test]
    fn zero_at_origin() {
        let m = SbModel::new(0.3, vec![2.0], vec![0.7]).unwrap();
        assert_eq!(m.gamma(0.0), 0.0);
        assert!((m.gamma(1e-9) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn node_ladder() {
        let t = sb_nodes(0.1, 2.0, SB_NODES);
        assert_eq!(t.len(), SB_NODES);
        assert!((bessel_j0(t[0] * 2.0) - 0.5).abs() < 1e-12);
        assert!((bessel_j0(t[SB_NODES - 1] * 0.1) - 0.5).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
