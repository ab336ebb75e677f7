use nalgebra::{DMatrix, DVector};

/// Outcome of a nonnegative least-squares solve.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// False when the iteration cap was reached.
    pub converged: bool,
}

/// Lawson-Hanson active-set solver for `min ||Ax - b||` subject to `x >= 0`.
///
/// Returned coefficients are nonnegative exactly; inactive ones are zero.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> NnlsSolution {
    let (m, k) = a.shape();
    assert_eq!(b.len(), m, "dimension mismatch");
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let scale = a.norm().max(f64::MIN_POSITIVE) * b.norm().max(f64::MIN_POSITIVE);
    let wtol = tol * scale;
    let mut iterations = 0;
    loop {
        let w = a.tr_mul(&(b - a * &x));
        let next = (0..k)
            .filter(|&j| !passive[j] && w[j] > wtol)
            .max_by(|&p, &q| w[p].total_cmp(&w[q]));
        let Some(t) = next else {
            return NnlsSolution { x, iterations, converged: true };
        };
        if iterations >= max_iter {
            return NnlsSolution { x, iterations, converged: false };
        }
        passive[t] = true;
        loop {
            iterations += 1;
            let s = passive_solve(a, b, &passive);
            let blocking = (0..k).filter(|&j| passive[j] && s[j] <= 0.0);
            let alpha = blocking
                .map(|j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            if !alpha.is_finite() {
                x = s;
                break;
            }
            x += (s - &x) * alpha;
            for j in 0..k {
                if passive[j] && x[j] <= tol * x.amax().max(1.0) {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if iterations >= max_iter {
                break;
            }
        }
        for j in 0..k {
            if !passive[j] {
                x[j] = 0.0;
            }
        }
    }
}

/// Unconstrained least squares on the passive columns, zero elsewhere.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut out = DVector::zeros(passive.len());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    let sol = svd.solve(b, eps).expect("both factors were computed");
    for (c, &j) in cols.iter().enumerate() {
        out[j] = sol[c];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_inside() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let s = nnls(&a, &b, 1e-10, 20);
        assert!(s.converged);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn active_constraint() {
        // Unconstrained solution (-1, 2); with x >= 0 the optimum is (0, 1.5)
        // for rows (1,0),(0,1),(1,1) and b = (-1, 2, 1).
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0, 1.0]);
        let s = nnls(&a, &b, 1e-10, 20);
        assert_eq!(s.x[0], 0.0);
        assert!((s.x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs() {
        let a = DMatrix::from_fn(5, 4, |i, j| ((i * 3 + j) % 7) as f64);
        let s = nnls(&a, &DVector::zeros(5), 1e-10, 40);
        assert!(s.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kkt_conditions_hold() {
        let a = DMatrix::from_fn(12, 6, |i, j| ((i as f64 + 1.0) * (j as f64 + 0.5)).sin());
        let b = DVector::from_fn(12, |i, _| (i as f64 * 0.7).cos());
        let s = nnls(&a, &b, 1e-10, 60);
        assert!(s.converged);
        let w = a.tr_mul(&(&b - &a * &s.x));
        for j in 0..6 {
            assert!(s.x[j] >= 0.0);
            if s.x[j] > 0.0 {
                assert!(w[j].abs() < 1e-8);
            } else {
                assert!(w[j] < 1e-8);
            }
        }
    }
}
