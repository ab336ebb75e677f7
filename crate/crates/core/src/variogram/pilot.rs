use super::cloud::SemivarianceCloud;
use super::Variogram;
use crate::error::{Error, Result};
use crate::smoothing::lag::LagSmoother;

/// Number of grid points the pilot curve is tabulated on.
pub const PILOT_GRID_SIZE: usize = 100;

/// The curve is tabulated up to this fraction of the largest lag; beyond it
/// few pairs remain and the local fit is dominated by boundary noise.
pub const PILOT_LAG_FRACTION: f64 = 0.55;

/// Smoothed semivariances tabulated on `[0, max_lag]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotVariogram {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub min_lag: f64,
    pub max_lag: f64,
}

impl PilotVariogram {
    /// Linear interpolation on the grid, clamped beyond `max_lag`.
    pub fn eval(&self, lag: f64) -> f64 {
        let m = self.grid.len();
        if lag >= self.max_lag {
            return self.values[m - 1];
        }
        let step = self.max_lag / (m - 1) as f64;
        let pos = (lag.max(0.0) / step).min((m - 1) as f64);
        let k = (pos.floor() as usize).min(m - 2);
        let w = pos - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// Grid points with positive lag and their values.
    pub fn positive_support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .filter(|&(h, _)| h > 0.0)
    }
}

impl Variogram for PilotVariogram {
    fn gamma(&self, lag: f64) -> f64 {
        if lag <= 0.0 {
            0.0
        } else {
            self.eval(lag)
        }
    }

    fn sill(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Local linear fit of the cloud against lag with bandwidth `h3`, halved and
/// floored at zero, on `[0, PILOT_LAG_FRACTION * largest lag]`. All pairs
/// enter the local fits.
pub fn pilot_variogram(cloud: &SemivarianceCloud, h3: f64) -> Result<PilotVariogram> {
    if !(h3 > 0.0 && h3.is_finite()) {
        return Err(Error::DegenerateCloud(format!("lag bandwidth {h3} is not positive")));
    }
    let (min_lag, largest) = cloud
        .lag_range()
        .ok_or_else(|| Error::DegenerateCloud("fewer than two pairs".into()))?;
    if !(largest > min_lag) {
        return Err(Error::DegenerateCloud("all lags are equal".into()));
    }
    let max_lag = (PILOT_LAG_FRACTION * largest).max(min_lag);
    let sorted = cloud.sorted();
    let sm = LagSmoother::new(&sorted, h3);
    let m = PILOT_GRID_SIZE;
    let grid: Vec<f64> = (0..m)
        .map(|g| if g + 1 == m { max_lag } else { max_lag * g as f64 / (m - 1) as f64 })
        .collect();
    let raw: Vec<Option<f64>> = grid.iter().map(|&t| sm.fit_at(t)).collect();
    if raw.iter().all(Option::is_none) {
        return Err(Error::DegenerateCloud(format!("no pairs within bandwidth {h3}")));
    }
    // Grid points without data take the nearest defined value.
    let values = (0..m)
        .map(|g| {
            let v = (0..m)
                .flat_map(|d| [g.checked_sub(d), Some(g + d)])
                .flatten()
                .find_map(|k| raw.get(k).copied().flatten())
                .unwrap_or(0.0);
            (0.5 * v).max(0.0)
        })
        .collect();
    Ok(PilotVariogram { grid, values, bandwidth: h3, min_lag, max_lag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Location;
    use crate::variogram::semivariance_cloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_locs(k: usize) -> Vec<Location> {
        (0..k * k)
            .map(|i| Location::new((i % k) as f64 / (k - 1) as f64, (i / k) as f64 / (k - 1) as f64))
            .collect()
    }

    #[test]
    fn constant_cloud() {
        let locs = grid_locs(6);
        let cloud = semivariance_cloud(&vec![0.0; locs.len()], &locs).with_values(std::iter::repeat(1.4));
        let p = pilot_variogram(&cloud, 0.2).unwrap();
        for h in [0.0, 0.01, 0.3, 1.0, 1.41, 5.0] {
            assert!((p.eval(h) - 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_cloud_is_reproduced() {
        let locs = grid_locs(7);
        let base = semivariance_cloud(&vec![0.0; locs.len()], &locs);
        let cloud = base.with_values(base.pairs.iter().map(|p| 0.2 + 3.0 * p.lag));
        let p = pilot_variogram(&cloud, 0.3).unwrap();
        assert!((p.max_lag - PILOT_LAG_FRACTION * 2f64.sqrt()).abs() < 1e-12);
        for h in [0.1, 0.3, 0.5, 0.75] {
            assert!((p.eval(h) - (0.1 + 1.5 * h)).abs() < 1e-8, "{h}");
        }
        assert!((p.eval(1.3) - (0.1 + 1.5 * p.max_lag)).abs() < 1e-8);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let locs = grid_locs(20);
        let e: Vec<f64> = (0..locs.len()).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let s2 = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((s2 - 1.0).abs() < 0.2);
        // Averaged over all pairs the cloud equals 2 s^2 exactly; each lag
        // window sees a subset of pairs.
        let p = pilot_variogram(&semivariance_cloud(&e, &locs), 0.15).unwrap();
        for h in [0.1, 0.3, 0.5, 0.75] {
            assert!((p.eval(h) - s2).abs() < 0.1, "{h}: {} vs {s2}", p.eval(h));
        }
    }

    #[test]
    fn clamps_and_floors() {
        let locs = grid_locs(5);
        let base = semivariance_cloud(&vec![0.0; locs.len()], &locs);
        let cloud = base.with_values(base.pairs.iter().map(|p| 1.0 - 2.0 * p.lag));
        let p = pilot_variogram(&cloud, 0.3).unwrap();
        assert!(p.values.iter().all(|&v| v >= 0.0));
        assert_eq!(p.eval(10.0), p.eval(p.max_lag));
    }

    #[test]
    fn degenerate_clouds() {
        let locs = [Location::new(0.0, 0.0), Location::new(1.0, 0.0)];
        assert!(matches!(
            pilot_variogram(&semivariance_cloud(&[0.0, 1.0], &locs), 0.5),
            Err(Error::DegenerateCloud(_))
        ));
    }
}
