//! Optimality certificate for the square-root estimator.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{norm_n, residual, RegressionProblem};
use crate::norms::Norm;

/// Residual norms below this fraction of `max(||Y||_n, ||X beta||_n)` are
/// indistinguishable from zero in floating point.
const INTERPOLATION_TOL: f64 = 1e-9;

/// True when the residual `r = Y - X beta` has collapsed to rounding level.
pub(crate) fn collapsed(y: &DVector<f64>, r: &DVector<f64>) -> bool {
    let sigma = norm_n(r);
    sigma == 0.0 || sigma < INTERPOLATION_TOL * norm_n(y).max(norm_n(&(y - r)))
}

/// Scalar KKT residual of `beta_hat` at penalty level `lambda`.
///
/// With `w = X^T eps / (n ||eps||_n)` and `eps = Y - X beta_hat`, returns
/// `max( max(0, Omega*(w) - lambda), |w^T beta_hat - lambda Omega(beta_hat)| / (1 + lambda Omega(beta_hat)) )`,
/// which vanishes exactly at a minimizer.
pub fn check_kkt(problem: &RegressionProblem, norm: &Norm, beta_hat: &DVector<f64>, lambda: f64) -> Result<f64> {
    if norm.dim() != problem.p() {
        return Err(Error::DimensionMismatch {
            what: "norm dimension (p)",
            expected: problem.p(),
            found: norm.dim(),
        });
    }
    let eps = residual(problem, beta_hat)?;
    let sigma = norm_n(&eps);
    if collapsed(problem.y(), &eps) {
        return Err(Error::Interpolation {
            residual_norm: sigma,
            beta: beta_hat.as_slice().to_vec(),
        });
    }
    let w = problem.scaled_gradient(&eps) / sigma;
    let dual_gap = (norm.dual(w.as_slice()) - lambda).max(0.0);
    let pen = lambda * norm.value(beta_hat.as_slice());
    let equality_gap = (w.dot(beta_hat) - pen).abs() / (1.0 + pen);
    Ok(dual_gap.max(equality_gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;
    use nalgebra::DMatrix;

    #[test]
    fn zero_is_optimal_for_large_lambda() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let prob = RegressionProblem::new(x, y).unwrap();
        let norm = NormSpec::L1.build(2).unwrap();
        let zero = DVector::zeros(2);
        let eps = prob.y().clone();
        let lam0 = norm.dual((prob.scaled_gradient(&eps) / norm_n(&eps)).as_slice());
        assert_eq!(check_kkt(&prob, &norm, &zero, lam0).unwrap(), 0.0);
        assert_eq!(check_kkt(&prob, &norm, &zero, 2.0 * lam0).unwrap(), 0.0);
        assert!(check_kkt(&prob, &norm, &zero, 0.5 * lam0).unwrap() > 0.0);
    }

    #[test]
    fn interpolation_is_an_error() {
        let prob = RegressionProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let norm = NormSpec::L1.build(2).unwrap();
        let beta = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            check_kkt(&prob, &norm, &beta, 0.1),
            Err(Error::Interpolation { .. })
        ));
    }
}
