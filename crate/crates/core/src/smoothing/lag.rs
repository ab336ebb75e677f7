//! One-dimensional local linear smoothing of values against lags.
//!
//! Semivariance clouds hold `n(n-1)/2` points, so a direct kernel sum per
//! evaluation point is quadratic overall. The triweight kernel is a polynomial
//! on its support, so every weighted moment is a polynomial in the data
//! coordinates. Points are bucketed into cells of width `h` and moments are
//! accumulated per cell about the cell center; a query at `t` touches at most
//! three cells and shifts their moments to `t` with the binomial theorem.
//! Cell-local coordinates lie in `[-1/2, 1/2)` and the shift is bounded by 2,
//! which keeps the expansion well conditioned.

/// Kernel-weighted moments of a local linear fit at one evaluation point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalSums {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub t0: f64,
    pub t1: f64,
}

impl LocalSums {
    /// Removes one point at standardized offset `u` with value `y`.
    pub fn without(mut self, u: f64, y: f64) -> Self {
        let k = triweight_unnormalized(u);
        self.s0 -= k;
        self.s1 -= k * u;
        self.s2 -= k * u * u;
        self.t0 -= k * y;
        self.t1 -= k * u * y;
        self
    }

    /// Intercept of the local line; falls back to the local mean when the
    /// design is degenerate and returns `None` with no positive weight.
    pub fn fit(&self) -> Option<f64> {
        let tiny = 1e-12 * self.s0.abs().max(f64::MIN_POSITIVE);
        if !(self.s0 > tiny) {
            return None;
        }
        let det = self.s0 * self.s2 - self.s1 * self.s1;
        if self.s2 > 0.0 && det > 1e-10 * self.s0 * self.s2 {
            Some((self.s2 * self.t0 - self.s1 * self.t1) / det)
        } else {
            Some(self.t0 / self.s0)
        }
    }
}

#[inline]
pub(crate) fn triweight_unnormalized(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        s * s * s
    }
}

const MOMENTS: usize = 9;

/// Binomial coefficients up to order 8.
const BINOM: [[f64; MOMENTS]; MOMENTS] = {
    let mut c = [[0.0; MOMENTS]; MOMENTS];
    let mut m = 0;
    while m < MOMENTS {
        c[m][0] = 1.0;
        let mut q = 1;
        while q <= m {
            c[m][q] = c[m - 1][q - 1] + if q < m { c[m - 1][q] } else { 0.0 };
            q += 1;
        }
        m += 1;
    }
    c
};

/// Sorted lags with aligned values.
#[derive(Debug, Clone)]
pub struct SortedLags {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

impl SortedLags {
    /// Sorts `(lag, value)` pairs by lag. Returns the permutation applied.
    pub fn new(lags: &[f64], values: &[f64]) -> (Self, Vec<usize>) {
        let mut order: Vec<usize> = (0..lags.len()).collect();
        order.sort_by(|&a, &b| lags[a].total_cmp(&lags[b]));
        let s = Self {
            lags: order.iter().map(|&k| lags[k]).collect(),
            values: order.iter().map(|&k| values[k]).collect(),
        };
        (s, order)
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

/// Bucketed moment index for one bandwidth.
pub struct LagSmoother<'a> {
    data: &'a SortedLags,
    h: f64,
    /// Bucket id (`floor(lag / h)`) of each bucket, ascending.
    bucket_id: Vec<i64>,
    /// `bucket_start[b]..bucket_start[b + 1]` are the elements of bucket `b`.
    bucket_start: Vec<usize>,
    elem_bucket: Vec<u32>,
    /// Within-bucket inclusive prefix sums of `v^q` and `v^q y`.
    pm: Vec<[f64; MOMENTS]>,
    py: Vec<[f64; MOMENTS - 1]>,
}

impl<'a> LagSmoother<'a> {
    pub fn new(data: &'a SortedLags, h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite(), "lag bandwidth must be positive");
        let n = data.len();
        let mut bucket_id = Vec::new();
        let mut bucket_start = Vec::new();
        let mut elem_bucket = Vec::with_capacity(n);
        let mut pm = Vec::with_capacity(n);
        let mut py = Vec::with_capacity(n);
        let mut acc_m = [0.0; MOMENTS];
        let mut acc_y = [0.0; MOMENTS - 1];
        for k in 0..n {
            let l = data.lags[k];
            let b = (l / h).floor() as i64;
            if bucket_id.last() != Some(&b) {
                bucket_id.push(b);
                bucket_start.push(k);
                acc_m = [0.0; MOMENTS];
                acc_y = [0.0; MOMENTS - 1];
            }
            elem_bucket.push((bucket_id.len() - 1) as u32);
            let v = l / h - (b as f64 + 0.5);
            let y = data.values[k];
            let mut p = 1.0;
            for q in 0..MOMENTS {
                acc_m[q] += p;
                if q < MOMENTS - 1 {
                    acc_y[q] += p * y;
                }
                p *= v;
            }
            pm.push(acc_m);
            py.push(acc_y);
        }
        bucket_start.push(n);
        Self {
            data,
            h,
            bucket_id,
            bucket_start,
            elem_bucket,
            pm,
            py,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// Kernel moments at `t` over all points with `|lag - t| <= h`.
    pub fn sums_at(&self, t: f64) -> LocalSums {
        let lags = &self.data.lags;
        let lo = lags.partition_point(|&l| l < t - self.h);
        let hi = lags.partition_point(|&l| l <= t + self.h);
        let mut u = [0.0; MOMENTS];
        let mut uy = [0.0; MOMENTS - 1];
        let tz = t / self.h;
        let mut k = lo;
        while k < hi {
            let b = self.elem_bucket[k] as usize;
            let bs = self.bucket_start[b];
            let be = self.bucket_start[b + 1].min(hi);
            let mut m = self.pm[be - 1];
            let mut my = self.py[be - 1];
            if k > bs {
                let (pm0, py0) = (&self.pm[k - 1], &self.py[k - 1]);
                for q in 0..MOMENTS {
                    m[q] -= pm0[q];
                }
                for q in 0..MOMENTS - 1 {
                    my[q] -= py0[q];
                }
            }
            // u = v + s for every point of this bucket
            let s = self.bucket_id[b] as f64 + 0.5 - tz;
            let mut spow = [1.0; MOMENTS];
            for q in 1..MOMENTS {
                spow[q] = spow[q - 1] * s;
            }
            for deg in 0..MOMENTS {
                let mut a = 0.0;
                let mut ay = 0.0;
                for q in 0..=deg {
                    let c = BINOM[deg][q] * spow[deg - q];
                    a += c * m[q];
                    if q < MOMENTS - 1 {
                        ay += c * my.get(q).copied().unwrap_or(0.0);
                    }
                }
                u[deg] += a;
                if deg < MOMENTS - 1 {
                    uy[deg] += ay;
                }
            }
            k = be;
        }
        // (1 - u^2)^3 = 1 - 3u^2 + 3u^4 - u^6
        let kern = |p: usize, pw: &[f64]| pw[p] - 3.0 * pw[p + 2] + 3.0 * pw[p + 4] - pw[p + 6];
        LocalSums {
            s0: kern(0, &u),
            s1: kern(1, &u),
            s2: kern(2, &u),
            t0: kern(0, &uy),
            t1: kern(1, &uy),
        }
    }

    pub fn fit_at(&self, t: f64) -> Option<f64> {
        self.sums_at(t).fit()
    }

    /// Standardized offset of element `k` from `t`.
    pub fn offset(&self, k: usize, t: f64) -> f64 {
        (self.data.lags[k] - t) / self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_sums(lags: &[f64], ys: &[f64], t: f64, h: f64) -> LocalSums {
        let mut s = LocalSums::default();
        for (&l, &y) in lags.iter().zip(ys) {
            let u = (l - t) / h;
            let k = triweight_unnormalized(u);
            s.s0 += k;
            s.s1 += k * u;
            s.s2 += k * u * u;
            s.t0 += k * y;
            s.t1 += k * u * y;
        }
        s
    }

    #[test]
    fn binomials() {
        assert_eq!(BINOM[4], [1.0, 4.0, 6.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(BINOM[8][4], 70.0);
    }

    #[test]
    fn bucketed_sums_match_direct() {
        let lags: Vec<f64> = (0..400).map(|i| ((i * 7919) % 1000) as f64 / 731.0).collect();
        let ys: Vec<f64> = lags.iter().map(|l| (3.0 * l).sin() + 0.1 * l).collect();
        let (data, _) = SortedLags::new(&lags, &ys);
        for h in [0.013, 0.1, 0.37, 2.0] {
            let sm = LagSmoother::new(&data, h);
            for t in [0.0, 0.05, 0.5, 0.777, 1.3681] {
                let a = sm.sums_at(t);
                let b = direct_sums(&data.lags, &data.values, t, h);
                let scale = b.s0.abs().max(1.0);
                for (x, y) in [(a.s0, b.s0), (a.s1, b.s1), (a.s2, b.s2), (a.t0, b.t0), (a.t1, b.t1)] {
                    assert!((x - y).abs() < 1e-9 * scale, "h={h} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn exact_on_lines() {
        let lags: Vec<f64> = (1..50).map(|i| i as f64 * 0.02).collect();
        let ys: Vec<f64> = lags.iter().map(|l| 0.3 + 2.0 * l).collect();
        let (data, _) = SortedLags::new(&lags, &ys);
        let sm = LagSmoother::new(&data, 0.15);
        for t in [0.1, 0.4, 0.95] {
            assert!((sm.fit_at(t).unwrap() - (0.3 + 2.0 * t)).abs() < 1e-9);
        }
        assert!(sm.fit_at(5.0).is_none());
    }
}
