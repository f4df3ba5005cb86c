//! Noise-normalized levels `f`, `lambda^0`, `lambda^S`, `lambda^{S^c}`, `lambda^m`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm_n, RegressionProblem};
use crate::norms::{ComplementNorm, Norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLevels {
    /// `lambda Omega(beta0) / ||eps||_n`.
    pub f: f64,
    /// `Omega*(eps^T X) / (n ||eps||_n)`.
    pub lambda0: f64,
    /// `Omega*((eps^T X)_S) / (n ||eps||_n)`, dual of the full norm on the zero-padded vector.
    pub lambda_s: f64,
    /// `(Omega^{S^c})*((eps^T X)_{S^c}) / (n ||eps||_n)`.
    pub lambda_sc: f64,
    /// `max(lambda_s, lambda_sc)`.
    pub lambda_m: f64,
    /// `||eps||_n`.
    pub noise_norm_n: f64,
}

impl EmpiricalLevels {
    /// `(1 - (lambda0 / lambda)(1 + 2f)) / (f + 2)` and `1 + f`, the bounds on
    /// `||eps_hat||_n / ||eps||_n` that hold when the overfitting condition does.
    pub fn residual_sandwich(&self, lambda: f64) -> (f64, f64) {
        (
            (1.0 - self.lambda0 / lambda * (1.0 + 2.0 * self.f)) / (self.f + 2.0),
            1.0 + self.f,
        )
    }

    /// `(lambda0 / lambda)(1 + 2f) < 1`.
    pub fn overfitting_condition(&self, lambda: f64) -> bool {
        self.lambda0 / lambda * (1.0 + 2.0 * self.f) < 1.0
    }
}

pub fn empirical_levels(
    problem: &RegressionProblem,
    norm: &Norm,
    s: &[usize],
    beta0: &DVector<f64>,
    noise: &DVector<f64>,
    lambda: f64,
) -> Result<EmpiricalLevels> {
    problem.check_beta(beta0)?;
    if noise.len() != problem.n() {
        return Err(Error::DimensionMismatch {
            what: "noise vector length (n)",
            expected: problem.n(),
            found: noise.len(),
        });
    }
    let sigma = norm_n(noise);
    if sigma == 0.0 {
        return Err(Error::InvalidConfig("noise vector is zero, so the levels are undefined".into()));
    }
    let comp = ComplementNorm::new(norm, s)?;
    let scale = problem.n() as f64 * sigma;
    let g: Vec<f64> = problem.x().tr_mul(noise).iter().map(|v| v / scale).collect();
    let lambda0 = norm.dual(&g);
    let lambda_s = norm.dual(&comp.pad_allowed(&g));
    let lambda_sc = comp.norm().dual(&comp.restrict_complement(&g));
    Ok(EmpiricalLevels {
        f: lambda * norm.value(beta0.as_slice()) / sigma,
        lambda0,
        lambda_s,
        lambda_sc,
        lambda_m: lambda_s.max(lambda_sc),
        noise_norm_n: sigma,
    })
}
