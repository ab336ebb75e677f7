use statrs::function::gamma::gamma;

use super::bessel::bessel_k;
use super::Variogram;
use crate::error::{Error, Result};

/// Unit-sill Matern semivariogram with nugget `c0`, practical-range scale `a`
/// and smoothness `nu`:
/// `c0 + (1 - c0) [1 - (3h/a)^nu K_nu(3h/a) / (2^(nu-1) Gamma(nu))]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub c0: f64,
    pub a: f64,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(c0: f64, a: f64, nu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c0) || !(a > 0.0) || !(nu > 0.0 && nu <= 2.0) {
            return Err(Error::InvalidInput(format!(
                "Matern parameters out of range: c0={c0}, a={a}, nu={nu}"
            )));
        }
        Ok(Self { c0, a, nu })
    }

    /// Correlation without the nugget: `(x^nu K_nu(x)) / (2^(nu-1) Gamma(nu))`.
    fn structured_correlation(&self, lag: f64) -> f64 {
        let x = 3.0 * lag / self.a;
        if x > 700.0 {
            return 0.0;
        }
        let norm = 2f64.powf(self.nu - 1.0) * gamma(self.nu);
        (x.powf(self.nu) * bessel_k(self.nu, x) / norm).clamp(0.0, 1.0)
    }
}

/// Matern semivariogram value; exactly zero at lag zero.
pub fn matern_variogram(lag: f64, p: &MaternParams) -> f64 {
    if lag <= 0.0 {
        return 0.0;
    }
    p.c0 + (1.0 - p.c0) * (1.0 - p.structured_correlation(lag))
}

impl Variogram for MaternParams {
    fn gamma(&self, lag: f64) -> f64 {
        matern_variogram(lag, self)
    }

    fn sill(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_reduction() {
        let p = MaternParams::new(0.2, 0.6, 0.5).unwrap();
        assert_eq!(matern_variogram(0.0, &p), 0.0);
        let want = 0.2 + 0.8 * (1.0 - (-3.0f64).exp());
        assert!((matern_variogram(0.6, &p) - want).abs() < 1e-12);
        assert!((matern_variogram(0.6, &p) - 0.960170).abs() < 1e-6);
    }

    #[test]
    fn reference_values() {
        let cases = [
            (0.25, 0.01, 0.370_429_202_374_653_6),
            (0.25, 0.3, 0.910_735_214_356_498_3),
            (0.5, 0.1, 0.514_775_472_229_893_4),
            (1.0, 0.01, 0.203_613_026_964_699_75),
            (1.0, 0.6, 0.903_624_565_292_334),
            (1.0, 1.0, 0.983_821_546_218_191_4),
        ];
        for (nu, lag, want) in cases {
            let p = MaternParams::new(0.2, 0.6, nu).unwrap();
            let got = matern_variogram(lag, &p);
            assert!((got - want).abs() < 1e-10, "nu={nu} lag={lag}: {got} vs {want}");
        }
    }

    #[test]
    fn sill_and_monotonicity() {
        for nu in [0.25, 0.5, 1.0] {
            for (c0, a) in [(0.0, 0.3), (0.2, 0.6), (0.8, 0.9)] {
                let p = MaternParams::new(c0, a, nu).unwrap();
                assert!((matern_variogram(10.0 * a, &p) - 1.0).abs() < 1e-6);
                let mut prev = 0.0;
                for i in 1..2000 {
                    let g = matern_variogram(i as f64 * 1e-3, &p);
                    assert!((0.0..=1.0).contains(&g));
                    assert!(g >= prev - 1e-14, "nu={nu}: not monotone at {i}");
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MaternParams::new(1.0, 0.6, 0.5).is_err());
        assert!(MaternParams::new(0.2, 0.0, 0.5).is_err());
        assert!(MaternParams::new(0.2, 0.6, 0.0).is_err());
    }
}
