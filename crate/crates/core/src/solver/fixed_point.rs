//! Consistency between the square-root fit and a plain squared-loss lasso.

use nalgebra::DVector;

use super::{fit_with_norm, SolverConfig};
use crate::error::{Error, Result};
use crate::model::RegressionProblem;
use crate::norms::NormSpec;
use crate::numeric::soft_threshold;

/// Cyclic coordinate descent for `1/2 ||Y - X b||_n^2 + penalty ||b||_1`.
///
/// Stops when a full sweep moves no coordinate by more than `tol` in the
/// `||X_j||_n`-weighted scale.
pub fn lasso_coordinate_descent(
    problem: &RegressionProblem,
    penalty: f64,
    tol: f64,
    max_sweeps: usize,
) -> DVector<f64> {
    let x = problem.x();
    let n = problem.n() as f64;
    let p = problem.p();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / n).collect();
    let mut beta = DVector::zeros(p);
    let mut r = problem.y().clone();
    for _ in 0..max_sweeps {
        let mut max_move = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho: f64 = col.dot(&r) / n + col_sq[j] * beta[j];
            let new = soft_threshold(rho, penalty) / col_sq[j];
            let delta: f64 = new - beta[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_move = max_move.max(delta.abs() * col_sq[j].sqrt());
            }
        }
        if max_move <= tol {
            break;
        }
    }
    beta
}

/// Fits the square-root lasso at `lambda`, then the plain lasso with penalty
/// `lambda * sigma_hat` where `sigma_hat = ||Y - X beta_hat||_n`, and returns
/// the sup-norm distance between the two estimates.
pub fn fixed_point_check(problem: &RegressionProblem, config: &SolverConfig) -> Result<f64> {
    let norm = NormSpec::L1.build(problem.p())?;
    let sr = fit_with_norm(problem, &norm, config)?;
    if !sr.converged {
        return Err(Error::NotConverged {
            kkt_residual: sr.kkt_residual,
        });
    }
    let plain = lasso_coordinate_descent(problem, config.lambda * sr.residual_norm_n, 1e-14, 1_000_000);
    Ok((plain - sr.beta_vec()).amax())
}
