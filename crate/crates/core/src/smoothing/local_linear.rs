//! Bivariate local linear smoothing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::spatial::{Location, SpatialSample};

/// Symmetric positive-definite 2x2 bandwidth matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthMatrix {
    h11: f64,
    h12: f64,
    h22: f64,
}

impl BandwidthMatrix {
    pub fn new(h11: f64, h12: f64, h22: f64) -> Result<Self> {
        let det = h11 * h22 - h12 * h12;
        if !(h11 > 0.0 && h22 > 0.0 && det > 0.0 && det.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth [[{h11}, {h12}], [{h12}, {h22}]] is not positive definite"
            )));
        }
        Ok(Self { h11, h12, h22 })
    }

    pub fn isotropic(h: f64) -> Result<Self> {
        Self::new(h, 0.0, h)
    }

    pub fn diagonal(h1: f64, h2: f64) -> Result<Self> {
        Self::new(h1, 0.0, h2)
    }

    pub fn entries(&self) -> [f64; 3] {
        [self.h11, self.h12, self.h22]
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    /// `H^{-1} u`.
    #[inline]
    pub fn solve(&self, u1: f64, u2: f64) -> (f64, f64) {
        let det = self.det();
        (
            (self.h22 * u1 - self.h12 * u2) / det,
            (self.h11 * u2 - self.h12 * u1) / det,
        )
    }

    /// Encodes `H = L L^t` as `(ln L11, L21, ln L22)`.
    pub fn to_log_cholesky(&self) -> [f64; 3] {
        let a = self.h11.sqrt();
        let b = self.h12 / a;
        let c = (self.h22 - b * b).sqrt();
        [a.ln(), b, c.ln()]
    }

    pub fn from_log_cholesky(p: [f64; 3]) -> Result<Self> {
        let a = p[0].exp();
        let c = p[2].exp();
        let b = p[1];
        Self::new(a * a, a * b, b * b + c * c)
    }
}

/// Weights `s` such that the local linear estimate at `target` is `s^t y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherVector {
    pub target: Location,
    pub weights: Vec<f64>,
}

impl SmootherVector {
    pub fn apply(&self, y: &[f64]) -> f64 {
        self.weights.iter().zip(y).map(|(w, v)| w * v).sum()
    }
}

/// Square matrix whose i-th row is the smoother vector at the i-th location.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingMatrix(pub DMatrix<f64>);

impl SmoothingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(y)).as_slice().to_vec()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Local linear smoother with a fixed kernel and bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct LocalLinear {
    pub bandwidth: BandwidthMatrix,
    pub kernel: Kernel,
}

/// Relative ridge added to the slope block of near-singular local systems.
const RIDGE: f64 = 1e-8;

impl LocalLinear {
    pub fn new(bandwidth: BandwidthMatrix) -> Self {
        Self {
            bandwidth,
            kernel: Kernel::Triweight,
        }
    }

    pub fn with_kernel(bandwidth: BandwidthMatrix, kernel: Kernel) -> Self {
        Self { bandwidth, kernel }
    }

    /// Smoother vector at `x`.
    ///
    /// The local plane is fitted in standardized coordinates `H^{-1}(x_i - x)`;
    /// the intercept is invariant to that affine change.
    pub fn smoother_vector(&self, x: Location, locs: &[Location]) -> Result<SmootherVector> {
        let det = self.bandwidth.det();
        let mut rows = Vec::with_capacity(locs.len());
        let mut cols: [Vec<f64>; 3] = Default::default();
        for (i, l) in locs.iter().enumerate() {
            let (u, v) = self.bandwidth.solve(l.x1 - x.x1, l.x2 - x.x2);
            let k = self.kernel.eval2(u, v) / det;
            if k > 0.0 {
                let r = k.sqrt();
                rows.push((i, r));
                cols[0].push(r);
                cols[1].push(r * u);
                cols[2].push(r * v);
            }
        }
        let support = rows.len();
        let singular = Error::SingularLocalFit { x1: x.x1, x2: x.x2, support };
        if support < 3 {
            return Err(singular);
        }
        let (q, y) = solve_local(cols).ok_or(singular)?;
        let mut weights = vec![0.0; locs.len()];
        for (k, &(i, r)) in rows.iter().enumerate() {
            weights[i] = r * (q[0][k] * y[0] + q[1][k] * y[1] + q[2][k] * y[2]);
        }
        Ok(SmootherVector { target: x, weights })
    }

    pub fn smoothing_matrix(&self, locs: &[Location]) -> Result<SmoothingMatrix> {
        let rows: Vec<Vec<f64>> = locs
            .par_iter()
            .map(|&x| self.smoother_vector(x, locs).map(|s| s.weights))
            .collect::<Result<_>>()?;
        let n = locs.len();
        Ok(SmoothingMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    /// Smoother vectors at arbitrary targets, as rows of a `targets x n` matrix.
    pub fn weights_at(&self, locs: &[Location], targets: &[Location]) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = targets
            .par_iter()
            .map(|&x| self.smoother_vector(x, locs).map(|s| s.weights))
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(targets.len(), locs.len(), |i, j| rows[i][j]))
    }

    pub fn smooth_at(
        &self,
        locs: &[Location],
        values: &[f64],
        targets: &[Location],
    ) -> Result<Vec<f64>> {
        targets
            .par_iter()
            .map(|&x| self.smoother_vector(x, locs).map(|s| s.apply(values)))
            .collect()
    }
}

impl LocalLinear {
    /// Normalized kernel weights at `x`: the local constant (Nadaraya-Watson)
    /// smoother. Nonnegative, so it maps nonnegative data to nonnegative fits.
    pub fn local_constant_vector(&self, x: Location, locs: &[Location]) -> Result<Vec<f64>> {
        let mut w: Vec<f64> = locs
            .iter()
            .map(|l| {
                let (u, v) = self.bandwidth.solve(l.x1 - x.x1, l.x2 - x.x2);
                self.kernel.eval2(u, v)
            })
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::SingularLocalFit { x1: x.x1, x2: x.x2, support: 0 });
        }
        w.iter_mut().for_each(|v| *v /= total);
        Ok(w)
    }
}

/// Share of the local constant fit below which a local linear variance
/// estimate is not trusted.
pub const LOCAL_CONSTANT_SHARE: f64 = 0.25;

/// Smoother for nonnegative data such as squared residuals.
///
/// Returns `max(ll, LOCAL_CONSTANT_SHARE * lc, floor)` with `ll` and `lc` the
/// local linear and local constant fits. Near the boundary a local linear fit
/// of noisy squares often dips to (or below) zero; truncating at a tiny floor
/// alone leaves near-zero standard deviations, unbounded standardized
/// residuals and a bias matrix that explodes at those sites.
#[derive(Debug, Clone)]
pub struct NonnegativeSmoother {
    /// `targets x n` local linear weights.
    pub linear: DMatrix<f64>,
    /// `targets x n` local constant weights.
    pub constant: DMatrix<f64>,
    pub floor: f64,
}

impl NonnegativeSmoother {
    pub fn new(
        smoother: &LocalLinear,
        locs: &[Location],
        targets: &[Location],
        floor: f64,
    ) -> Result<Self> {
        let linear = smoother.weights_at(locs, targets)?;
        let rows: Vec<Vec<f64>> = targets
            .par_iter()
            .map(|&x| smoother.local_constant_vector(x, locs))
            .collect::<Result<_>>()?;
        let constant = DMatrix::from_fn(targets.len(), locs.len(), |i, j| rows[i][j]);
        Ok(Self { linear, constant, floor })
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let z = DVector::from_column_slice(z);
        let ll = &self.linear * &z;
        ll.iter()
            .enumerate()
            .map(|(i, &v)| {
                let lc = self.constant.row(i).dot(&z.transpose());
                v.max(LOCAL_CONSTANT_SHARE * lc).max(self.floor)
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram-Schmidt with reorthogonalization of three columns, `M = Q R`.
fn thin_qr(mut cols: [Vec<f64>; 3]) -> ([Vec<f64>; 3], [[f64; 3]; 3]) {
    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let c = dot(&done[i], &rest[0]);
                r[i][j] += c;
                rest[0].iter_mut().zip(&done[i]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        r[j][j] = norm;
        if norm > 0.0 {
            cols[j].iter_mut().for_each(|a| *a /= norm);
        }
    }
    (cols, r)
}

/// For the weighted design `M = W^{1/2} Z`, returns `Q` and `R^{-t} e1`, so
/// that the smoother weights are `W^{1/2} Q R^{-t} e1`. Working with `Q`
/// instead of the normal equations `Z^t W Z` keeps the error proportional to
/// the condition of `M` rather than its square. When `M` is near rank
/// deficient a small ridge is added to the slope terms only, which keeps
/// exact reproduction of constants.
fn solve_local(mut cols: [Vec<f64>; 3]) -> Option<([Vec<f64>; 3], [f64; 3])> {
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    if norms[0] == 0.0 {
        return None;
    }
    let (q, r) = thin_qr(cols.clone());
    let det2 = (r[0][0] * r[1][1] * r[2][2]).powi(2);
    let (q, r) = if det2.is_finite() && det2 > 1e-12 * norms[0] * norms[1] * norms[2] && det2 > 0.0 {
        (q, r)
    } else {
        let s = (RIDGE * norms.iter().sum::<f64>() / 3.0).sqrt();
        cols[0].extend([0.0, 0.0]);
        cols[1].extend([s, 0.0]);
        cols[2].extend([0.0, s]);
        let (q, r) = thin_qr(cols);
        if !(r[1][1] > 0.0 && r[2][2] > 0.0) {
            return None;
        }
        (q, r)
    };
    let y0 = 1.0 / r[0][0];
    let y1 = -r[0][1] * y0 / r[1][1];
    let y2 = -(r[0][2] * y0 + r[1][2] * y1) / r[2][2];
    Some((q, [y0, y1, y2]))
}

/// Local linear trend estimate at `targets`.
pub fn smooth_at(
    sample: &SpatialSample,
    bandwidth: BandwidthMatrix,
    targets: &[Location],
) -> Result<Vec<f64>> {
    LocalLinear::new(bandwidth).smooth_at(sample.locations(), sample.values(), targets)
}

pub fn smoother_vector(
    x: Location,
    locs: &[Location],
    bandwidth: BandwidthMatrix,
) -> Result<SmootherVector> {
    LocalLinear::new(bandwidth).smoother_vector(x, locs)
}

pub fn smoothing_matrix(locs: &[Location], bandwidth: BandwidthMatrix) -> Result<SmoothingMatrix> {
    LocalLinear::new(bandwidth).smoothing_matrix(locs)
}

/// Smoothed squared residuals, never below `floor` (see [`NonnegativeSmoother`]).
pub fn variance_pilot(
    locs: &[Location],
    squared_residuals: &[f64],
    bandwidth: BandwidthMatrix,
    targets: &[Location],
    floor: f64,
) -> Result<Vec<f64>> {
    if squared_residuals.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("negative squared residual".into()));
    }
    Ok(NonnegativeSmoother::new(&LocalLinear::new(bandwidth), locs, targets, floor)?
        .apply(squared_residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn generic_points() -> Vec<Location> {
        vec![
            Location::new(0.1, 0.2),
            Location::new(0.45, 0.15),
            Location::new(0.3, 0.6),
            Location::new(0.7, 0.4),
            Location::new(0.55, 0.8),
        ]
    }

    /// Weighted least squares of the local plane in raw coordinates,
    /// solved by explicit 3x3 inversion.
    fn wls_oracle(x: Location, locs: &[Location], y: &[f64], h: BandwidthMatrix) -> f64 {
        let mut xtwx = Matrix3::zeros();
        let mut xtwy = Vector3::zeros();
        for (l, &v) in locs.iter().zip(y) {
            let (u1, u2) = h.solve(l.x1 - x.x1, l.x2 - x.x2);
            let k = Kernel::Triweight.eval(u1) * Kernel::Triweight.eval(u2) / h.det();
            let row = Vector3::new(1.0, l.x1 - x.x1, l.x2 - x.x2);
            xtwx += k * row * row.transpose();
            xtwy += k * v * row;
        }
        (xtwx.try_inverse().unwrap() * xtwy)[0]
    }

    #[test]
    fn log_cholesky_round_trip() {
        let h = BandwidthMatrix::new(0.3, 0.05, 0.2).unwrap();
        let back = BandwidthMatrix::from_log_cholesky(h.to_log_cholesky()).unwrap();
        for (a, b) in h.entries().iter().zip(back.entries()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(BandwidthMatrix::new(0.1, 0.2, 0.1).is_err());
    }

    #[test]
    fn reproduces_constants_and_planes() {
        let locs = generic_points();
        let h = BandwidthMatrix::isotropic(0.8).unwrap();
        let ll = LocalLinear::new(h);
        let x = Location::new(0.4, 0.45);
        let s = ll.smoother_vector(x, &locs).unwrap();
        let c: Vec<f64> = locs.iter().map(|_| 7.0).collect();
        assert!((s.apply(&c) - 7.0).abs() < 1e-12);
        let lin: Vec<f64> = locs.iter().map(|l| 1.0 + 2.0 * l.x1 + 3.0 * l.x2).collect();
        assert!((s.apply(&lin) - (1.0 + 2.0 * x.x1 + 3.0 * x.x2)).abs() < 1e-10);
    }

    #[test]
    fn matches_wls_oracle() {
        let locs = generic_points();
        let y = [1.3, -0.2, 2.5, 0.7, 1.9];
        let h = BandwidthMatrix::isotropic(0.5).unwrap();
        for x in [Location::new(0.4, 0.4), Location::new(0.35, 0.3)] {
            let s = smoother_vector(x, &locs, h).unwrap();
            let oracle = wls_oracle(x, &locs, &y, h);
            assert!((s.apply(&y) - oracle).abs() < 1e-10, "{} vs {oracle}", s.apply(&y));
        }
    }

    #[test]
    fn too_small_support_is_singular() {
        let locs = generic_points();
        let h = BandwidthMatrix::isotropic(0.01).unwrap();
        let err = smoother_vector(Location::new(0.9, 0.9), &locs, h).unwrap_err();
        assert!(matches!(err, Error::SingularLocalFit { .. }));
    }

    #[test]
    fn collinear_support_uses_ridge() {
        // Three points on a line: the plane is not identified but the ridge
        // keeps the intercept well defined and constants reproduced.
        let locs = vec![
            Location::new(0.0, 0.0),
            Location::new(0.5, 0.0),
            Location::new(1.0, 0.0),
        ];
        let h = BandwidthMatrix::isotropic(2.0).unwrap();
        let s = smoother_vector(Location::new(0.5, 0.0), &locs, h).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn smoothing_matrix_rows_sum_to_one() {
        let locs = generic_points();
        let s = smoothing_matrix(&locs, BandwidthMatrix::new(0.7, 0.1, 0.9).unwrap()).unwrap();
        for i in 0..locs.len() {
            assert!((s.0.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_pilot_cases() {
        let locs = generic_points();
        let h = BandwidthMatrix::isotropic(0.9).unwrap();
        let four = vec![4.0; 5];
        let v = variance_pilot(&locs, &four, h, &locs, 1e-6).unwrap();
        assert!(v.iter().all(|x| (x - 4.0).abs() < 1e-12));
        let lin: Vec<f64> = locs.iter().map(|l| 1.0 + l.x1).collect();
        let v = variance_pilot(&locs, &lin, h, &[Location::new(0.4, 0.5)], 0.0).unwrap();
        assert!((v[0] - 1.4).abs() < 1e-10);
        assert!(variance_pilot(&locs, &[-1.0, 1.0, 1.0, 1.0, 1.0], h, &locs, 0.0).is_err());
    }
}
