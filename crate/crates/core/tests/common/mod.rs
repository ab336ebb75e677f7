//! Helpers shared by the integration tests: independent dense solvers used
//! as oracles, and small random fits.
#![allow(dead_code)]

use condrisk::bias::{fit_components, BandwidthChoice, FitConfig, FittedComponents, LagBandwidth};
use condrisk::smoothing::BandwidthMatrix;
use condrisk::spatial::{Location, SpatialSample};
use condrisk::variogram::{rescale_to_unit_sill, PilotVariogram, Variogram, PILOT_GRID_SIZE};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_locations(rng: &mut impl Rng, n: usize) -> Vec<Location> {
    (0..n).map(|_| Location::new(rng.random(), rng.random())).collect()
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Local linear weights from the raw weighted normal equations
/// `e1^t (X^t W X)^{-1} X^t W`, with `X = [1, x_i - x]` in original
/// coordinates, solved in exact rational arithmetic. Every step (the
/// bandwidth solve, the triweight polynomial, elimination) is rational, so
/// the result is the exact smoother of the given `f64` inputs.
pub fn brute_smoother(x: Location, locs: &[Location], h: [f64; 3]) -> Option<Vec<f64>> {
    let q = |v: f64| BigRational::from_float(v).expect("finite");
    let (h11, h12, h22) = (q(h[0]), q(h[1]), q(h[2]));
    let det = &h11 * &h22 - &h12 * &h12;
    let one = BigRational::one();
    let tri = |t: &BigRational| -> BigRational {
        if t.abs() >= one {
            BigRational::zero()
        } else {
            let s = &one - t * t;
            &s * &s * &s
        }
    };
    let mut rows = Vec::with_capacity(locs.len());
    for l in locs {
        let d1 = q(l.x1) - q(x.x1);
        let d2 = q(l.x2) - q(x.x2);
        let u = (&h22 * &d1 - &h12 * &d2) / &det;
        let v = (&h11 * &d2 - &h12 * &d1) / &det;
        rows.push((tri(&u) * tri(&v), [one.clone(), d1, d2]));
    }
    let mut a = vec![vec![BigRational::zero(); 4]; 3];
    for (w, z) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += w * &z[i] * &z[j];
            }
        }
    }
    a[0][3] = one.clone();
    for col in 0..3 {
        let piv = (col..3).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = &a[r][col] / &a[col][col];
                for k in col..4 {
                    let t = &f * &a[col][k];
                    a[r][k] -= t;
                }
            }
        }
    }
    let c: Vec<BigRational> = (0..3).map(|i| &a[i][3] / &a[i][i]).collect();
    Some(
        rows.iter()
            .map(|(w, z)| (w * (&c[0] * &z[0] + &c[1] * &z[1] + &c[2] * &z[2])).to_f64().expect("finite"))
            .collect(),
    )
}

/// Simple kriging weights `C^{-1} c` by explicit inversion.
pub fn brute_sk_weights(cov: &DMatrix<f64>, cross: &[f64]) -> Vec<f64> {
    let inv = cov.clone().try_inverse().expect("covariance is invertible");
    (inv * DVector::from_column_slice(cross)).as_slice().to_vec()
}

/// Ordinary kriging weights (and Lagrange multiplier last) from the
/// variogram form of the system, by explicit inversion.
pub fn brute_ok_weights(locs: &[Location], gamma: &impl Variogram, target: Location) -> Vec<f64> {
    let n = locs.len();
    let m = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i < n && j < n {
            gamma.gamma(locs[i].distance(&locs[j]))
        } else if i == n && j == n {
            0.0
        } else {
            1.0
        }
    });
    let rhs = DVector::from_fn(n + 1, |i, _| if i < n { gamma.gamma(locs[i].distance(&target)) } else { 1.0 });
    (m.try_inverse().expect("kriging system is invertible") * rhs).as_slice().to_vec()
}

pub fn fixed_config() -> FitConfig {
    FitConfig {
        trend: BandwidthChoice::Fixed(BandwidthMatrix::isotropic(0.5).unwrap()),
        variance: BandwidthChoice::Fixed(BandwidthMatrix::isotropic(1.0).unwrap()),
        h3: LagBandwidth::Fixed(0.25),
        ..FitConfig::default()
    }
}

/// A heteroscedastic sample on `m x m` jittered grid sites.
pub fn random_sample(seed: u64, m: usize) -> SpatialSample {
    let mut r = rng(seed);
    let mut locs = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let jit = 0.3 / m as f64;
            locs.push(Location::new(
                i as f64 / (m - 1) as f64 + jit * (r.random::<f64>() - 0.5),
                j as f64 / (m - 1) as f64 + jit * (r.random::<f64>() - 0.5),
            ));
        }
    }
    let y = locs
        .iter()
        .map(|l| 1.0 + l.x1 - 0.5 * l.x2 + (0.3 + 0.4 * l.x1) * normal(&mut r))
        .collect();
    SpatialSample::new(locs, y).unwrap()
}

/// A fit on a random sample whose variogram has had its nugget removed and
/// been rescaled to unit sill.
pub fn zero_nugget_fit(seed: u64, m: usize, targets: &[Location]) -> FittedComponents {
    let s = random_sample(seed, m);
    let mut f = fit_components(&s, targets, &fixed_config()).unwrap();
    f.variogram.nugget = 0.0;
    if f.variogram.weights.iter().all(|&w| w == 0.0) {
        f.variogram.weights[0] = 1.0;
    }
    f.variogram = rescale_to_unit_sill(&f.variogram).unwrap();
    f
}

/// A noisy increasing pilot curve tabulated like the real one.
pub fn random_pilot(rng: &mut impl Rng) -> PilotVariogram {
    let max_lag = 0.3 + rng.random::<f64>();
    let range = 0.05 + rng.random::<f64>() * max_lag;
    let nugget = 0.3 * rng.random::<f64>();
    let noise = 0.1 * rng.random::<f64>();
    let grid: Vec<f64> = (0..PILOT_GRID_SIZE).map(|k| max_lag * k as f64 / (PILOT_GRID_SIZE - 1) as f64).collect();
    let values = grid
        .iter()
        .map(|&h| {
            if h == 0.0 {
                0.0
            } else {
                let v = nugget + (1.0 - nugget) * (1.0 - (-3.0 * h / range).exp());
                (v + noise * (rng.random::<f64>() - 0.5)).max(0.0)
            }
        })
        .collect();
    PilotVariogram { grid, values, bandwidth: 0.1, min_lag: max_lag / 50.0, max_lag }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}
