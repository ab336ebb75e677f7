use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use super::scenario::FieldModel;
use crate::error::Result;
use crate::kriging::SimpleKriging;
use crate::spatial::{LagTable, Location};
use crate::variogram::{correlation_from_table, cross_correlation_matrix};

/// Upper Gaussian tail `P[N(mean, sd^2) >= c]`; a step function when `sd` is 0.
pub fn gaussian_exceedance(mean: f64, sd: f64, c: f64) -> f64 {
    if sd > 0.0 {
        0.5 * erfc((c - mean) / (sd * std::f64::consts::SQRT_2))
    } else if mean >= c {
        1.0
    } else {
        0.0
    }
}

/// Simple kriging with the true trend and covariance, for scoring.
///
/// Weights and kriging standard deviations depend only on the design, so
/// they are computed once and reused for every field on it.
#[derive(Debug, Clone)]
pub struct TruthKriging {
    sample_mean: Vec<f64>,
    target_mean: Vec<f64>,
    /// `n x targets`.
    weights: DMatrix<f64>,
    sk_sd: Vec<f64>,
}

impl TruthKriging {
    pub fn new(model: &FieldModel, sample: &[Location], targets: &[Location]) -> Result<Self> {
        let sd: Vec<f64> = sample.iter().map(|x| model.sd(x)).collect();
        let tsd: Vec<f64> = targets.iter().map(|x| model.sd(x)).collect();
        let mut cov = correlation_from_table(&LagTable::new(sample), &model.matern);
        let mut cross = cross_correlation_matrix(sample, targets, &model.matern);
        for j in 0..cov.ncols() {
            for i in 0..cov.nrows() {
                cov[(i, j)] *= sd[i] * sd[j];
            }
        }
        for j in 0..cross.ncols() {
            for i in 0..cross.nrows() {
                cross[(i, j)] *= sd[i] * tsd[j];
            }
        }
        let sk = SimpleKriging::new(&cov)?;
        let weights = sk.weight_matrix(&cross);
        let sk_sd = (0..targets.len())
            .map(|k| {
                let explained = weights.column(k).dot(&cross.column(k));
                (tsd[k] * tsd[k] - explained).max(0.0).sqrt()
            })
            .collect();
        Ok(Self {
            sample_mean: sample.iter().map(|x| model.mean(x)).collect(),
            target_mean: targets.iter().map(|x| model.mean(x)).collect(),
            weights,
            sk_sd,
        })
    }

    /// Simple kriging predictions of `Y` at the targets.
    pub fn predict(&self, values: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(
            values.len(),
            values.iter().zip(&self.sample_mean).map(|(y, m)| y - m),
        );
        let k = self.weights.tr_mul(&d);
        self.target_mean.iter().zip(k.iter()).map(|(m, v)| m + v).collect()
    }

    pub fn kriging_sd(&self) -> &[f64] {
        &self.sk_sd
    }

    /// `1 - Phi[(c - Y_SK) / sigma_SK]` at every target.
    pub fn risk(&self, values: &[f64], c: f64) -> Vec<f64> {
        self.predict(values)
            .iter()
            .zip(&self.sk_sd)
            .map(|(&p, &s)| gaussian_exceedance(p, s, c))
            .collect()
    }
}

/// Conditional exceedance probability at one target under the true model.
pub fn theoretical_conditional_risk(
    model: &FieldModel,
    sample: &[Location],
    values: &[f64],
    target: Location,
    c: f64,
) -> Result<f64> {
    Ok(TruthKriging::new(model, sample, &[target])?.risk(values, c)[0])
}
