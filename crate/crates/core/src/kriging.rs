//! Simple kriging with a known covariance and ordinary kriging in variogram
//! form.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{Error, Result};
use crate::spatial::Location;
use crate::variogram::{cholesky_psd, PsdFactor, Variogram};

/// Factored simple kriging system for zero-mean data.
///
/// The factorization depends only on the data locations and covariance, so
/// one system serves every target and every data vector.
#[derive(Debug, Clone)]
pub struct SimpleKriging {
    factor: PsdFactor,
}

impl SimpleKriging {
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        Ok(Self { factor: cholesky_psd(covariance)? })
    }

    pub fn len(&self) -> usize {
        self.factor.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn factor(&self) -> &PsdFactor {
        &self.factor
    }

    /// Kriging weights `C^{-1} c`.
    pub fn weights(&self, cross: &[f64]) -> Vec<f64> {
        self.factor.solve_vec(cross)
    }

    /// Weights for many targets at once: column `k` of the result holds the
    /// weights for column `k` of `cross` (`n x targets`).
    pub fn weight_matrix(&self, cross: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(cross)
    }

    /// `c^t C^{-1} data`.
    pub fn predict(&self, data: &[f64], cross: &[f64]) -> f64 {
        dot(&self.weights(cross), data)
    }

    /// `prior - c^t C^{-1} c`, floored at zero.
    pub fn variance(&self, cross: &[f64], prior: f64) -> f64 {
        (prior - dot(&self.weights(cross), cross)).max(0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn simple_kriging_predict(system: &SimpleKriging, data: &[f64], cross: &[f64]) -> f64 {
    system.predict(data, cross)
}

pub fn simple_kriging_variance(system: &SimpleKriging, cross: &[f64], prior: f64) -> f64 {
    system.variance(cross, prior)
}

/// Ordinary kriging system `[Gamma 1; 1^t 0]` factored by LU.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging<'a, V: Variogram> {
    locations: &'a [Location],
    gamma: &'a V,
    lu: LU<f64, Dyn, Dyn>,
}

impl<'a, V: Variogram> OrdinaryKriging<'a, V> {
    pub fn new(locations: &'a [Location], gamma: &'a V) -> Result<Self> {
        let n = locations.len();
        if n < 2 {
            return Err(Error::TooFewPoints { got: n, need: 2 });
        }
        let m = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) if i == j => 0.0,
            (true, true) => gamma.gamma(locations[i].distance(&locations[j])),
            (false, false) => 0.0,
            _ => 1.0,
        });
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem);
        }
        let pivots = lu.u().diagonal().amin();
        if !(pivots > 1e-14 * lu.u().diagonal().amax()) {
            return Err(Error::SingularSystem);
        }
        Ok(Self { locations, gamma, lu })
    }

    /// Weights summing to one, followed by the Lagrange multiplier.
    pub fn weights(&self, target: &Location) -> Result<Vec<f64>> {
        let n = self.locations.len();
        let rhs = DVector::from_fn(n + 1, |i, _| {
            if i < n {
                self.gamma.gamma(self.locations[i].distance(target))
            } else {
                1.0
            }
        });
        let sol = self.lu.solve(&rhs).ok_or(Error::SingularSystem)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(sol.as_slice().to_vec())
    }

    pub fn predict(&self, values: &[f64], target: &Location) -> Result<f64> {
        let w = self.weights(target)?;
        Ok(dot(&w[..self.locations.len()], values))
    }
}

pub fn ordinary_kriging_predict(
    values: &[f64],
    gamma: &impl Variogram,
    locs: &[Location],
    target: &Location,
) -> Result<f64> {
    OrdinaryKriging::new(locs, gamma)?.predict(values, target)
}
