use nalgebra::DMatrix;

use super::Variogram;
use crate::error::{Error, Result};
use crate::spatial::{LagTable, Location};

/// `R_ij = 1 - gamma(||x_i - x_j||)` with unit diagonal.
pub fn correlation_matrix(locs: &[Location], gamma: &impl Variogram) -> DMatrix<f64> {
    correlation_from_table(&LagTable::new(locs), gamma)
}

/// Correlation matrix using a precomputed lag table.
pub fn correlation_from_table(table: &LagTable, gamma: &impl Variogram) -> DMatrix<f64> {
    table.symmetric_matrix(1.0, |h| 1.0 - gamma.gamma(h))
}

/// `rho(||target - x_i||)` for each location.
pub fn cross_correlation(target: &Location, locs: &[Location], gamma: &impl Variogram) -> Vec<f64> {
    locs.iter().map(|x| 1.0 - gamma.gamma(target.distance(x))).collect()
}

/// Rectangular correlation block between two location sets.
pub fn cross_correlation_matrix(
    rows: &[Location],
    cols: &[Location],
    gamma: &impl Variogram,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| 1.0 - gamma.gamma(rows[i].distance(&cols[j])))
}

const JITTERS: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Lower Cholesky factor of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub l: DMatrix<f64>,
    /// Diagonal jitter that was added, relative to the mean diagonal.
    pub jitter: f64,
}

impl PsdFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self.l.solve_lower_triangular(b).expect("factor has nonzero diagonal");
        self.l.tr_solve_lower_triangular(&y).expect("factor has nonzero diagonal")
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        self.solve(&DMatrix::from_column_slice(b.len(), 1, b)).as_slice().to_vec()
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let m = DMatrix::from_column_slice(b.len(), 1, b);
        self.l.solve_lower_triangular(&m).expect("factor has nonzero diagonal").as_slice().to_vec()
    }

    /// Computes `L x`.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..=i).map(|k| self.l[(i, k)] * x[k]).sum()).collect()
    }
}

/// Cholesky factorization retrying with growing diagonal jitter.
pub fn cholesky_psd(m: &DMatrix<f64>) -> Result<PsdFactor> {
    assert!(m.is_square(), "matrix must be square");
    if let Some(c) = m.clone().cholesky() {
        return Ok(PsdFactor { l: c.unpack(), jitter: 0.0 });
    }
    let n = m.nrows();
    let scale = (m.trace() / n.max(1) as f64).abs().max(f64::MIN_POSITIVE);
    for &d in &JITTERS {
        let mut j = m.clone();
        for i in 0..n {
            j[(i, i)] += d * scale;
        }
        if let Some(c) = j.cholesky() {
            log::debug!("cholesky needed jitter {d:e}");
            return Ok(PsdFactor { l: c.unpack(), jitter: d });
        }
    }
    Err(Error::NotPsd { jitter: JITTERS[JITTERS.len() - 1] })
}
