use crate::smoothing::lag::SortedLags;
use crate::spatial::Location;

/// One pair of the semivariance cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPair {
    pub lag: f64,
    /// Squared increment. Nonnegative for raw clouds; bias-corrected clouds
    /// may hold negative values.
    pub sqdiff: f64,
    pub i: u32,
    pub j: u32,
}

/// All `n(n-1)/2` pairs `(||x_i - x_j||, (e_i - e_j)^2)`, `i < j`, in
/// row-by-row order.
#[derive(Debug, Clone, PartialEq)]
pub struct SemivarianceCloud {
    pub n: usize,
    pub pairs: Vec<CloudPair>,
}

impl SemivarianceCloud {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Smallest and largest lag.
    pub fn lag_range(&self) -> Option<(f64, f64)> {
        if self.pairs.len() < 2 {
            return None;
        }
        Some(self.pairs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            (lo.min(p.lag), hi.max(p.lag))
        }))
    }

    pub fn lags(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lag).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.sqdiff).collect()
    }

    /// Lags and values sorted by lag.
    pub fn sorted(&self) -> SortedLags {
        SortedLags::new(&self.lags(), &self.values()).0
    }

    /// Same pairs with replaced values.
    pub fn with_values(&self, values: impl IntoIterator<Item = f64>) -> SemivarianceCloud {
        let pairs = self
            .pairs
            .iter()
            .zip(values)
            .map(|(p, v)| CloudPair { sqdiff: v, ..*p })
            .collect();
        SemivarianceCloud { n: self.n, pairs }
    }
}

/// Semivariance cloud of standardized residuals.
pub fn semivariance_cloud(std_residuals: &[f64], locs: &[Location]) -> SemivarianceCloud {
    assert_eq!(std_residuals.len(), locs.len(), "length mismatch");
    let n = locs.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(CloudPair {
                lag: locs[i].distance(&locs[j]),
                sqdiff: (std_residuals[i] - std_residuals[j]).powi(2),
                i: i as u32,
                j: j as u32,
            });
        }
    }
    SemivarianceCloud { n, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let c = semivariance_cloud(&[1.0, 3.0], &[Location::new(0.0, 0.0), Location::new(3.0, 4.0)]);
        assert_eq!(c.pairs, vec![CloudPair { lag: 5.0, sqdiff: 4.0, i: 0, j: 1 }]);
    }

    #[test]
    fn equal_residuals_give_zero_cloud() {
        let locs: Vec<Location> = (0..5).map(|i| Location::new(i as f64, 0.5 * i as f64)).collect();
        let c = semivariance_cloud(&[0.7; 5], &locs);
        assert_eq!(c.len(), 10);
        assert!(c.pairs.iter().all(|p| p.sqdiff == 0.0));
    }

    #[test]
    fn four_points_by_hand() {
        let locs = [
            Location::new(0.0, 0.0),
            Location::new(1.0, 0.0),
            Location::new(0.0, 2.0),
            Location::new(1.0, 2.0),
        ];
        let e = [0.5, -1.0, 2.0, 0.0];
        let c = semivariance_cloud(&e, &locs);
        let want = [
            (1.0, 2.25),
            (2.0, 2.25),
            (5f64.sqrt(), 0.25),
            (5f64.sqrt(), 9.0),
            (2.0, 1.0),
            (1.0, 4.0),
        ];
        assert_eq!(c.len(), 6);
        for (p, (lag, sq)) in c.pairs.iter().zip(want) {
            assert!((p.lag - lag).abs() < 1e-15 && (p.sqdiff - sq).abs() < 1e-15);
        }
    }
}
