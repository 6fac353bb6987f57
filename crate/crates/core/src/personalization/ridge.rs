use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Coefficients minimizing `‖y - Xβ - c‖² + λ‖β‖²`. The intercept `c` is not
/// penalized, and is zero when fitted without one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Ridge regression by Cholesky factorization of the penalized normal
/// equations. With an intercept, the columns and targets are centered first,
/// which leaves the intercept unpenalized.
pub fn ridge_fit(design: &DMatrix<f64>, targets: &DVector<f64>, lambda: f64, fit_intercept: bool) -> Result<RidgeFit> {
    let (n, d) = design.shape();
    if n == 0 {
        return Err(Error::Empty("ridge regression needs at least one row".into()));
    }
    if targets.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: targets.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", format!("{lambda} must be finite and >= 0")));
    }
    if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(domain("design", "entries must be finite"));
    }

    let (x, y, col_means, y_mean) = if fit_intercept {
        let col_means = DVector::from_iterator(d, design.column_iter().map(|c| c.mean()));
        let y_mean = targets.mean();
        let mut x = design.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-col_means[j]);
        }
        let y = targets.add_scalar(-y_mean);
        (x, y, col_means, y_mean)
    } else {
        (design.clone(), targets.clone(), DVector::zeros(d), 0.0)
    };

    if d == 0 {
        return Ok(RidgeFit {
            intercept: y_mean,
            coefficients: Vec::new(),
            lambda,
        });
    }

    let mut gram = x.tr_mul(&x);
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let rhs = x.tr_mul(&y);
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{d}x{d} normal equations with lambda = {lambda}")))?
        .solve(&rhs);
    // Cholesky succeeds on numerically semi-definite matrices whose solve is
    // garbage; reject those too.
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular("non-finite ridge solution".into()));
    }
    let intercept = if fit_intercept { y_mean - col_means.dot(&beta) } else { 0.0 };
    Ok(RidgeFit {
        intercept,
        coefficients: beta.iter().copied().collect(),
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    /// Gaussian elimination with partial pivoting on the full system
    /// including the intercept column; independent of the centered Cholesky
    /// route.
    fn oracle(x: &[Vec<f64>], y: &[f64], lambda: f64, intercept: bool) -> Vec<f64> {
        let d = x[0].len() + usize::from(intercept);
        let row = |r: &Vec<f64>| -> Vec<f64> {
            let mut v = if intercept { vec![1.0] } else { vec![] };
            v.extend_from_slice(r);
            v
        };
        let mut a = vec![vec![0.0; d + 1]; d];
        for (r, &t) in x.iter().zip(y) {
            let z = row(r);
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += z[i] * z[j];
                }
                a[i][d] += z[i] * t;
            }
        }
        for (i, ai) in a.iter_mut().enumerate() {
            if !(intercept && i == 0) {
                ai[i] += lambda;
            }
        }
        for col in 0..d {
            let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in col + 1..d {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut sol = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| a[i][j] * sol[j]).sum();
            sol[i] = (a[i][d] - s) / a[i][i];
        }
        sol
    }

    fn system(rng: &mut RngStream, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let y = (0..n).map(|_| 3.0 + Distribution::<f64>::sample(&StandardNormal, rng)).collect();
        (x, y)
    }

    fn to_nalgebra(x: &[Vec<f64>], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let d = x[0].len();
        (
            DMatrix::from_fn(x.len(), d, |i, j| x[i][j]),
            DVector::from_column_slice(y),
        )
    }

    #[test]
    fn scalar_examples() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 2.0);
        for (lambda, beta) in [(0.0, 2.0), (1.0, 1.0)] {
            let fit = ridge_fit(&x, &y, lambda, false).unwrap();
            assert!((fit.coefficients[0] - beta).abs() < 1e-15);
            assert_eq!(fit.intercept, 0.0);
        }
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let mut rng = RngStream::new(8, 0);
        for trial in 0..100 {
            let (x, y) = system(&mut rng, 50, 5);
            let intercept = trial % 2 == 0;
            let lambda = if trial == 0 { 0.3 } else { 0.05 * (trial % 7) as f64 + 0.01 };
            let (xm, yv) = to_nalgebra(&x, &y);
            let fit = ridge_fit(&xm, &yv, lambda, intercept).unwrap();
            let expected = oracle(&x, &y, lambda, intercept);
            let mut got = if intercept { vec![fit.intercept] } else { vec![] };
            got.extend(&fit.coefficients);
            let norm = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = got.iter().zip(&expected).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * norm, "trial {trial}: {err}");
        }
    }

    #[test]
    fn residual_of_penalized_normal_equations() {
        let mut rng = RngStream::new(9, 0);
        let (x, y) = system(&mut rng, 40, 6);
        let (xm, yv) = to_nalgebra(&x, &y);
        let fit = ridge_fit(&xm, &yv, 0.7, true).unwrap();
        let beta = DVector::from_vec(fit.coefficients.clone());
        let resid = yv.add_scalar(-fit.intercept) - &xm * &beta;
        // Gradient: Xᵀr = λβ and the residuals sum to zero.
        let grad = xm.tr_mul(&resid) - &beta * 0.7;
        assert!(grad.norm() <= 1e-8 * xm.tr_mul(&yv).norm());
        assert!(resid.sum().abs() <= 1e-8 * yv.norm());
    }

    #[test]
    fn singular_without_penalty() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(ridge_fit(&x, &y, 0.0, false), Err(Error::Singular(_))));
        assert!(ridge_fit(&x, &y, 0.1, false).is_ok());
    }

    #[test]
    fn unique_for_positive_lambda() {
        let mut rng = RngStream::new(10, 0);
        let (x, y) = system(&mut rng, 30, 4);
        let (xm, yv) = to_nalgebra(&x, &y);
        let a = ridge_fit(&xm, &yv, 0.5, true).unwrap();
        // Same problem with rows permuted.
        let perm: Vec<usize> = (0..30).rev().collect();
        let xp = DMatrix::from_fn(30, 4, |i, j| x[perm[i]][j]);
        let yp = DVector::from_fn(30, |i, _| y[perm[i]]);
        let b = ridge_fit(&xp, &yp, 0.5, true).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!((a.intercept - b.intercept).abs() < 1e-10);
    }

    #[test]
    fn huge_penalty_gives_mean() {
        let mut rng = RngStream::new(11, 0);
        let (x, y) = system(&mut rng, 30, 4);
        let (xm, yv) = to_nalgebra(&x, &y);
        let fit = ridge_fit(&xm, &yv, 1e12, true).unwrap();
        assert!(fit.coefficients.iter().all(|b| b.abs() < 1e-9));
        assert!((fit.intercept - yv.mean()).abs() < 1e-9);
    }
}
