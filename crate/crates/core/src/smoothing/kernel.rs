//! Univariate kernels and their multiplicative 2-D products.

use std::f64::consts::PI;

/// Univariate kernel profile; 2-D weights are products over coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Kernel {
    #[default]
    Triweight,
    Epanechnikov,
    /// Standard normal density truncated to `|t| <= 3`.
    TruncatedGaussian,
}

impl Kernel {
    /// Half-width of the support in standardized units.
    pub fn support(self) -> f64 {
        match self {
            Kernel::Triweight | Kernel::Epanechnikov => 1.0,
            Kernel::TruncatedGaussian => 3.0,
        }
    }

    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        if t.abs() > self.support() {
            return 0.0;
        }
        match self {
            Kernel::Triweight => {
                let s = 1.0 - t * t;
                35.0 / 32.0 * s * s * s
            }
            Kernel::Epanechnikov => 0.75 * (1.0 - t * t),
            Kernel::TruncatedGaussian => (-0.5 * t * t).exp() / (2.0 * PI).sqrt(),
        }
    }

    /// Product kernel `K(u1) K(u2)`.
    #[inline]
    pub fn eval2(self, u1: f64, u2: f64) -> f64 {
        let a = self.eval(u1);
        if a == 0.0 {
            0.0
        } else {
            a * self.eval(u2)
        }
    }

    pub fn parse(name: &str) -> Option<Kernel> {
        match name.to_ascii_lowercase().as_str() {
            "triweight" => Some(Kernel::Triweight),
            "epanechnikov" => Some(Kernel::Epanechnikov),
            "gaussian" | "truncated-gaussian" => Some(Kernel::TruncatedGaussian),
            _ => None,
        }
    }
}

/// Multiplicative triweight kernel on the plane.
pub fn triweight_kernel_2d(u: [f64; 2]) -> f64 {
    Kernel::Triweight.eval2(u[0], u[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triweight_values() {
        let c = 35.0f64 / 32.0;
        assert!((triweight_kernel_2d([0.0, 0.0]) - c * c).abs() < 1e-15);
        assert!((triweight_kernel_2d([0.0, 0.0]) - 1.196289).abs() < 1e-6);
        assert_eq!(triweight_kernel_2d([1.0, 0.0]), 0.0);
        assert_eq!(triweight_kernel_2d([0.3, -1.2]), 0.0);
        let v = triweight_kernel_2d([0.5, 0.0]);
        assert!((v - c * 0.75f64.powi(3) * c).abs() < 1e-15);
        assert!((v - 0.504684).abs() < 1e-6);
    }

    #[test]
    fn kernels_integrate_to_one() {
        for k in [Kernel::Triweight, Kernel::Epanechnikov] {
            let n = 20_000;
            let h = 2.0 / n as f64;
            let s: f64 = (0..n).map(|i| k.eval(-1.0 + (i as f64 + 0.5) * h) * h).sum();
            assert!((s - 1.0).abs() < 1e-6, "{k:?}: {s}");
        }
    }
}
