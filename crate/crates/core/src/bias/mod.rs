//! Correction of the bias introduced by estimating variance and dependence
//! from residuals of a smoothed trend, and the joint iterative fit.

mod fit;

pub use fit::{fit_components, BandwidthChoice, FitConfig, FittedComponents, LagBandwidth};

use nalgebra::DMatrix;

use crate::smoothing::{LocalLinear, SmoothingMatrix};
use crate::spatial::Location;
use crate::variogram::{CloudPair, SemivarianceCloud};

/// Lower bound applied to `1 + b_ii` before dividing by it.
pub const BIAS_DIAG_FLOOR: f64 = 0.1;

/// `S Sigma` and `S Sigma S^t`.
fn sandwich(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let s_sigma = s * sigma;
    let full = &s_sigma * s.transpose();
    (s_sigma, full)
}

/// `S Sigma S^t - Sigma S^t - S Sigma`, symmetrized.
fn bias_core(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let (s_sigma, mut m) = sandwich(s, sigma);
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * ((m[(i, j)] - s_sigma[(j, i)] - s_sigma[(i, j)])
                + (m[(j, i)] - s_sigma[(i, j)] - s_sigma[(j, i)]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Covariance of the residuals `(I - S) Y`:
/// `Sigma + S Sigma S^t - Sigma S^t - S Sigma`.
pub fn residual_covariance(s: &SmoothingMatrix, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    bias_core(s.matrix(), sigma) + sigma
}

/// `D^{-1} (S Sigma S^t - Sigma S^t - S Sigma) D^{-1}` with `D` given by its
/// diagonal of standard deviations.
pub fn bias_matrix(sd: &[f64], s: &SmoothingMatrix, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut b = bias_core(s.matrix(), sigma);
    let n = sd.len();
    assert_eq!(b.nrows(), n);
    for j in 0..n {
        for i in 0..n {
            b[(i, j)] /= sd[i] * sd[j];
        }
    }
    b
}

/// Covariance of squared Gaussian residuals, `2 Sigma_r (.) Sigma_r`.
pub fn squared_residual_cov_normal(sigma_r: &DMatrix<f64>) -> DMatrix<f64> {
    sigma_r.map(|v| 2.0 * v * v)
}

/// Converts a covariance matrix to a correlation matrix. Zero-variance rows
/// get a unit diagonal and zero off-diagonal entries.
pub fn covariance_to_correlation(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let sd: Vec<f64> = sigma.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            (sigma[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Squared residuals divided by `1 + b_ii` (floored).
pub fn debiased_squares(r2: &[f64], bias: &DMatrix<f64>) -> Vec<f64> {
    r2.iter()
        .enumerate()
        .map(|(i, v)| v / (1.0 + bias[(i, i)]).max(BIAS_DIAG_FLOOR))
        .collect()
}

/// Variance estimate at `targets` from debiased squared residuals, floored.
pub fn corrected_variance(
    locs: &[Location],
    r2: &[f64],
    bias: &DMatrix<f64>,
    smoother: &LocalLinear,
    targets: &[Location],
    floor: f64,
) -> crate::Result<Vec<f64>> {
    let z = debiased_squares(r2, bias);
    Ok(crate::smoothing::NonnegativeSmoother::new(smoother, locs, targets, floor)?.apply(&z))
}

/// Cloud with each pair's value reduced by its expected bias,
/// `sqdiff - b_ii - b_jj + 2 b_ij`.
pub fn corrected_cloud(cloud: &SemivarianceCloud, bias: &DMatrix<f64>) -> SemivarianceCloud {
    let pairs = cloud
        .pairs
        .iter()
        .map(|p| {
            let (i, j) = (p.i as usize, p.j as usize);
            CloudPair {
                sqdiff: p.sqdiff - bias[(i, i)] - bias[(j, j)] + 2.0 * bias[(i, j)],
                ..*p
            }
        })
        .collect();
    SemivarianceCloud { n: cloud.n, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::semivariance_cloud;

    fn m(r: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, v.len() / r, v)
    }

    #[test]
    fn residual_covariance_limits() {
        let sigma = m(2, &[2.0, 0.3, 0.3, 1.0]);
        let zero = SmoothingMatrix(DMatrix::zeros(2, 2));
        assert_eq!(residual_covariance(&zero, &sigma), sigma);
        let id = SmoothingMatrix(DMatrix::identity(2, 2));
        assert!(residual_covariance(&id, &sigma).amax() < 1e-15);
    }

    #[test]
    fn residual_covariance_identity_3x3() {
        let s = m(3, &[0.5, 0.3, 0.2, 0.1, 0.7, 0.2, 0.25, 0.25, 0.5]);
        let sigma = m(3, &[1.5, 0.4, -0.2, 0.4, 2.0, 0.3, -0.2, 0.3, 0.8]);
        let i_s = DMatrix::identity(3, 3) - &s;
        let want = &i_s * &sigma * i_s.transpose();
        let got = residual_covariance(&SmoothingMatrix(s), &sigma);
        assert!((got - want).amax() < 1e-12);
    }

    #[test]
    fn bias_matrix_cases() {
        let s = SmoothingMatrix(m(1, &[1.0]));
        let b = bias_matrix(&[1.5], &s, &m(1, &[2.25]));
        assert!((b[(0, 0)] + 1.0).abs() < 1e-15);
        assert!(residual_covariance(&s, &m(1, &[2.25]))[(0, 0)].abs() < 1e-15);
        let zero = SmoothingMatrix(DMatrix::zeros(2, 2));
        assert_eq!(bias_matrix(&[1.0, 2.0], &zero, &m(2, &[1.0, 0.5, 0.5, 4.0])), DMatrix::zeros(2, 2));
    }

    #[test]
    fn diagonal_identity_2x2() {
        let s = SmoothingMatrix(m(2, &[0.6, 0.4, 0.3, 0.7]));
        let sd = [1.2, 0.7];
        let sigma = m(2, &[1.44, 0.2, 0.2, 0.49]);
        let b = bias_matrix(&sd, &s, &sigma);
        let sr = residual_covariance(&s, &sigma);
        for i in 0..2 {
            assert!((sr[(i, i)] - sd[i] * sd[i] * (1.0 + b[(i, i)])).abs() < 1e-12);
        }
        assert_eq!(b[(0, 1)], b[(1, 0)]);
    }

    #[test]
    fn squared_residual_cov() {
        assert_eq!(squared_residual_cov_normal(&DMatrix::identity(2, 2)), DMatrix::identity(2, 2) * 2.0);
        assert_eq!(
            squared_residual_cov_normal(&m(2, &[1.0, 0.5, 0.5, 1.0])),
            m(2, &[2.0, 0.5, 0.5, 2.0])
        );
        assert_eq!(squared_residual_cov_normal(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn cloud_correction() {
        let locs = [Location::new(0.0, 0.0), Location::new(1.0, 0.0)];
        let cloud = semivariance_cloud(&[0.0, 2.0], &locs);
        assert_eq!(corrected_cloud(&cloud, &DMatrix::zeros(2, 2)), cloud);
        let b = m(2, &[0.1, 0.05, 0.05, 0.1]);
        let c = corrected_cloud(&cloud, &b);
        assert!((c.pairs[0].sqdiff - (4.0 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn debiased_squares_halve() {
        let b = DMatrix::identity(3, 3);
        assert_eq!(debiased_squares(&[2.0, 4.0, 6.0], &b), vec![1.0, 2.0, 3.0]);
        let deg = DMatrix::identity(1, 1) * -1.0;
        assert_eq!(debiased_squares(&[1.0], &deg), vec![10.0]);
    }
}
