//! K-fold cross-validation of the penalty level.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::error::{Error, Result};
use crate::model::RegressionProblem;
use crate::norms::Norm;
use crate::solver::{fit_with_norm, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    /// Mean held-out squared error over folds; `None` when any fold failed.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub lambda: f64,
    /// Deduplicated grid in increasing order.
    pub curve: Vec<CvPoint>,
}

/// Solver settings for CV cells. The iteration budget is smaller than the
/// default: cells that exhaust it sit next to the interpolation regime and are
/// excluded as non-converged anyway.
pub fn cv_solver_config() -> SolverConfig {
    SolverConfig {
        max_outer: 15,
        max_inner: 1000,
        ..SolverConfig::default()
    }
}

/// `size` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..size)
        .map(|i| (a + (b - a) * i as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Contiguous blocks of a seeded shuffle of `0..n`, sizes differing by at most one.
pub(crate) fn fold_assignment(n: usize, folds: usize, seed: u64, stream: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, stream));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Held-out squared errors of one fold along a decreasing grid, warm started.
fn fold_errors(
    problem: &RegressionProblem,
    norm: &Norm,
    test: &[usize],
    grid_desc: &[f64],
    base: &SolverConfig,
) -> Result<Vec<Option<f64>>> {
    let mut in_test = vec![false; problem.n()];
    for &i in test {
        in_test[i] = true;
    }
    let train_rows: Vec<usize> = (0..problem.n()).filter(|&i| !in_test[i]).collect();
    let train = problem.select_rows(&train_rows)?;
    let held = problem.select_rows(test)?;
    let mut warm: Option<Vec<f64>> = None;
    let mut interpolated = false;
    let mut out = Vec::with_capacity(grid_desc.len());
    for &lambda in grid_desc {
        let cfg = SolverConfig {
            lambda,
            beta_init: warm.clone(),
            ..base.clone()
        };
        if interpolated {
            out.push(None);
            continue;
        }
        match fit_with_norm(&train, norm, &cfg) {
            // if interpolating is optimal at lambda it is optimal at every smaller value
            Err(Error::Interpolation { .. }) => {
                interpolated = true;
                out.push(None);
            }
            Ok(fit) if fit.converged => {
                let b = DVector::from_column_slice(&fit.beta_hat);
                let r = held.y() - held.x() * &b;
                out.push(Some(r.norm_squared() / held.n() as f64));
                warm = Some(fit.beta_hat);
            }
            _ => out.push(None),
        }
    }
    Ok(out)
}

/// Picks the grid value with the smallest mean held-out squared error.
/// Ties go to the smaller value.
pub fn cross_validate_lambda(
    problem: &RegressionProblem,
    norm: &Norm,
    grid: &[f64],
    folds: usize,
    seed: u64,
    stream: u64,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("CV grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidConfig(format!("CV grid values must be positive, got {bad}")));
    }
    if folds < 2 || folds > problem.n() {
        return Err(Error::InvalidConfig(format!(
            "folds must lie in 2..={}, got {folds}",
            problem.n()
        )));
    }
    let mut asc = grid.to_vec();
    asc.sort_by(f64::total_cmp);
    asc.dedup();
    let desc: Vec<f64> = asc.iter().rev().copied().collect();

    let blocks = fold_assignment(problem.n(), folds, seed, stream);
    let base = cv_solver_config();
    let per_fold = blocks
        .par_iter()
        .map(|test| fold_errors(problem, norm, test, &desc, &base))
        .collect::<Result<Vec<_>>>()?;

    let curve: Vec<CvPoint> = asc
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let k = desc.len() - 1 - i;
            let cells: Option<Vec<f64>> = per_fold.iter().map(|f| f[k]).collect();
            CvPoint {
                lambda,
                mse: cells.map(|c| c.iter().sum::<f64>() / c.len() as f64),
            }
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for pt in &curve {
        if let Some(m) = pt.mse {
            // strict comparison in increasing order keeps the smaller lambda on ties
            if best.is_none_or(|(_, bm)| m < bm) {
                best = Some((pt.lambda, m));
            }
        }
    }
    let (lambda, _) = best.ok_or(Error::NoValidLambda)?;
    Ok(CvOutcome { lambda, curve })
}
