//! Square-root regularized regression
//! `argmin_b ||Y - X b||_n + lambda * Omega(b)`.
//!
//! The outer loop sets `sigma = ||Y - X b||_n` and the inner loop solves
//! `1/2 ||Y - X b||_n^2 + sigma * lambda * Omega(b)`. This is alternating
//! minimization of `||r||_n^2 / (2 sigma) + sigma / 2 + lambda Omega(b)`,
//! whose fixed points are exactly the KKT points of the square-root problem.

mod apg;
mod fixed_point;
mod kkt;

use log::debug;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm_n, RegressionProblem};
use crate::norms::{Norm, NormSpec};

pub use apg::lipschitz;
pub use fixed_point::{fixed_point_check, lasso_coordinate_descent};
pub use kkt::check_kkt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative change of `sigma` between outer iterations.
    pub tol_outer: f64,
    /// Inner stopping level for the dual norm of the gradient-mapping
    /// perturbation divided by `sigma`, i.e. on the scale of `lambda`.
    pub tol_inner: f64,
    pub kkt_tol: f64,
    pub beta_init: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_outer: 100,
            max_inner: 20_000,
            tol_outer: 1e-8,
            tol_inner: 1e-9,
            kkt_tol: 1e-6,
            beta_init: None,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        for (name, v) in [
            ("tol_outer", self.tol_outer),
            ("tol_inner", self.tol_inner),
            ("kkt_tol", self.kkt_tol),
        ] {
            if !positive(v) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidConfig("iteration limits must be at least 1".into()));
        }
        if let Some(b) = &self.beta_init {
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("beta_init"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub beta_hat: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm_n: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// `||Y - X beta_hat||_n + lambda * Omega(beta_hat)`.
    pub objective: f64,
    /// Objective after each outer iteration (starting point first).
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn beta_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

pub fn fit(problem: &RegressionProblem, spec: &NormSpec, config: &SolverConfig) -> Result<FitResult> {
    let norm = spec.build(problem.p())?;
    fit_with_norm(problem, &norm, config)
}

pub fn fit_with_norm(problem: &RegressionProblem, norm: &Norm, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    if norm.dim() != problem.p() {
        return Err(Error::DimensionMismatch {
            what: "norm dimension (p)",
            expected: problem.p(),
            found: norm.dim(),
        });
    }
    let lambda = config.lambda;
    let p = problem.p();
    let y_norm = norm_n(problem.y());
    let objective_at = |beta: &DVector<f64>, r: &DVector<f64>| norm_n(r) + lambda * norm.value(beta.as_slice());

    let zero_result = |kkt: f64| {
        let obj = y_norm;
        FitResult {
            lambda,
            beta_hat: vec![0.0; p],
            residual: problem.y().as_slice().to_vec(),
            residual_norm_n: y_norm,
            outer_iters: 0,
            inner_iters: 0,
            kkt_residual: kkt,
            converged: true,
            objective: obj,
            objective_trace: vec![obj],
        }
    };
    if y_norm == 0.0 {
        return Ok(zero_result(0.0));
    }
    // zero satisfies the optimality conditions when lambda dominates the
    // dual norm of the scaled gradient at zero
    let grad0 = problem.scaled_gradient(problem.y()) / y_norm;
    if lambda >= norm.dual(grad0.as_slice()) {
        return Ok(zero_result(0.0));
    }

    let mut beta = match &config.beta_init {
        Some(b) => {
            let b = DVector::from_column_slice(b);
            problem.check_beta(&b)?;
            b
        }
        None => DVector::zeros(p),
    };
    let mut l = lipschitz(problem.x(), 100, 1e-10);
    let mut r = problem.y() - problem.x() * &beta;
    let mut sigma = norm_n(&r);
    let mut trace = vec![objective_at(&beta, &r)];
    let mut inner_total = 0;
    let mut outer_converged = false;
    let mut outer = 0;
    let interpolation = |sigma: f64, beta: &DVector<f64>| Error::Interpolation {
        residual_norm: sigma,
        beta: beta.as_slice().to_vec(),
    };
    // inner tolerance tracks the outer progress and tightens to tol_inner
    let mut tol = config.tol_inner;
    // plain fixed-point values sigma_k, sigma_{k+1} = phi(sigma_k), ... for extrapolation
    let mut history: Vec<f64> = vec![sigma];

    while outer < config.max_outer {
        outer += 1;
        if kkt::collapsed(problem.y(), &r) {
            return Err(interpolation(sigma, &beta));
        }
        let solve = |start: DVector<f64>, at: f64, l: f64, tol: f64| {
            apg::InnerProblem {
                x: problem.x(),
                y: problem.y(),
                norm,
                tau: at * lambda,
                scale: at,
            }
            .solve(start, l, config.max_inner, tol)
        };
        let out = solve(beta.clone(), sigma, l, tol);
        inner_total += out.iters;
        l = out.lipschitz;
        let mut cand = out.beta;
        let mut r_cand = problem.y() - problem.x() * &cand;
        let mut sigma_in = sigma;
        let mut sigma_out = norm_n(&r_cand);
        let mut obj = objective_at(&cand, &r_cand);
        let mut inner_ok = out.converged;
        history.push(sigma_out);

        // Aitken extrapolation of the scalar fixed point sigma = phi(sigma),
        // kept only when it lowers the objective
        if history.len() >= 3 && !kkt::collapsed(problem.y(), &r_cand) {
            let k = history.len();
            let (s0, s1, s2) = (history[k - 3], history[k - 2], history[k - 1]);
            let (d1, d2) = (s1 - s0, s2 - s1);
            let denom = d2 - d1;
            if d1 * d2 > 0.0 && d2.abs() < d1.abs() && denom != 0.0 {
                let mut s_acc = s2 - d2 * d2 / denom;
                if s_acc <= 0.0 {
                    // geometric decay towards zero: probe far down, the objective test guards it
                    s_acc = 1e-3 * s2;
                }
                if s_acc.is_finite() && (s_acc - s2).abs() > config.tol_outer * s2 {
                    let ext = solve(cand.clone(), s_acc, l, tol);
                    inner_total += ext.iters;
                    l = ext.lipschitz;
                    let r_ext = problem.y() - problem.x() * &ext.beta;
                    let obj_ext = objective_at(&ext.beta, &r_ext);
                    if obj_ext <= obj {
                        sigma_in = s_acc;
                        sigma_out = norm_n(&r_ext);
                        cand = ext.beta;
                        r_cand = r_ext;
                        obj = obj_ext;
                        inner_ok = ext.converged;
                        history = vec![s_acc, sigma_out];
                    }
                }
            }
        }

        beta = cand;
        r = r_cand;
        trace.push(obj);
        let change = (sigma_out - sigma_in).abs() / sigma_in.max(f64::MIN_POSITIVE);
        debug!("outer {outer}: sigma {sigma_out:.12e}, change {change:.3e}, inner tol {tol:.1e} (converged {inner_ok})");
        sigma = sigma_out;
        let tight = tol <= config.tol_inner;
        if change < config.tol_outer && inner_ok && tight {
            outer_converged = true;
            break;
        }
        tol = if change < config.tol_outer {
            config.tol_inner
        } else {
            config.tol_inner.max(1e-2 * lambda * change)
        };
    }
    if kkt::collapsed(problem.y(), &r) {
        return Err(interpolation(sigma, &beta));
    }

    let kkt = check_kkt(problem, norm, &beta, lambda)?;
    Ok(FitResult {
        lambda,
        objective: objective_at(&beta, &r),
        beta_hat: beta.as_slice().to_vec(),
        residual: r.as_slice().to_vec(),
        residual_norm_n: sigma,
        outer_iters: outer,
        inner_iters: inner_total,
        kkt_residual: kkt,
        converged: outer_converged && kkt <= config.kkt_tol,
        objective_trace: trace,
    })
}
