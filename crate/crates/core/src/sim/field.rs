use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::scenario::FieldModel;
use crate::error::Result;
use crate::spatial::{LagTable, Location, SpatialSample};
use crate::variogram::{cholesky_psd, correlation_from_table, PsdFactor};

/// Gaussian field generator for a fixed set of locations.
///
/// The Matern correlation matrix is factored once, so repeated draws cost one
/// triangular product each.
#[derive(Debug, Clone)]
pub struct FieldSimulator {
    locations: Vec<Location>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    factor: PsdFactor,
}

impl FieldSimulator {
    pub fn new(model: &FieldModel, locations: &[Location]) -> Result<Self> {
        let r = correlation_from_table(&LagTable::new(locations), &model.matern);
        Ok(Self {
            locations: locations.to_vec(),
            mean: locations.iter().map(|x| model.mean(x)).collect(),
            sd: locations.iter().map(|x| model.sd(x)).collect(),
            factor: cholesky_psd(&r)?,
        })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    /// Standardized errors `L z`, unit variance and Matern correlation.
    pub fn errors(&self, rng: &mut impl Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.locations.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.factor.mul_lower(&z)
    }

    /// One realization `mu + sigma * (L z)`.
    pub fn simulate(&self, rng: &mut impl Rng) -> Result<SpatialSample> {
        let e = self.errors(rng);
        let y = (0..e.len()).map(|i| self.mean[i] + self.sd[i] * e[i]).collect();
        SpatialSample::new(self.locations.clone(), y)
    }

    /// True covariance `D R D` of the field.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = self.factor.l.clone() * self.factor.l.transpose();
        for j in 0..c.ncols() {
            for i in 0..c.nrows() {
                c[(i, j)] *= self.sd[i] * self.sd[j];
            }
        }
        c
    }
}

/// One field over `locations`; convenience wrapper that refactors each call.
pub fn simulate_field(
    model: &FieldModel,
    locations: &[Location],
    rng: &mut impl Rng,
) -> Result<SpatialSample> {
    FieldSimulator::new(model, locations)?.simulate(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{TrendId, VarianceId};
    use crate::variogram::MaternParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(c0: f64) -> FieldModel {
        FieldModel {
            trend: TrendId::Mu1,
            variance: VarianceId::Var2,
            matern: MaternParams::new(c0, 0.6, 0.5).unwrap(),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let locs: Vec<Location> = (0..12).map(|i| Location::new(i as f64 / 11.0, 0.3)).collect();
        let sim = FieldSimulator::new(&model(0.2), &locs).unwrap();
        let a = sim.simulate(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sim.simulate(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn single_site_moments() {
        let x = Location::new(0.3, 0.6);
        let m = model(0.0);
        let sim = FieldSimulator::new(&m, &[x]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let draws: Vec<f64> =
            (0..n).map(|_| m.mean(&x) + m.sd(&x) * sim.errors(&mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s2 = m.sd(&x).powi(2);
        assert!((mean - m.mean(&x)).abs() < 4.0 * (s2 / n as f64).sqrt());
        assert!((var - s2).abs() < 4.0 * s2 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn covariance_has_true_variances() {
        let locs = [Location::new(0.0, 0.0), Location::new(1.0, 1.0), Location::new(0.5, 0.1)];
        let m = model(0.2);
        let c = FieldSimulator::new(&m, &locs).unwrap().covariance();
        for (i, x) in locs.iter().enumerate() {
            assert!((c[(i, i)] - m.sd(x).powi(2)).abs() < 1e-12);
        }
    }
}
