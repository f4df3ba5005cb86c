//! Simulation study: Toeplitz-Gaussian designs, four coefficient scenarios,
//! square-root LASSO and square-root SLOPE fitted at the theoretical and the
//! cross-validated penalty level.
//!
//! Random streams (ChaCha20, seeded with the study seed, stream set per use):
//! design `0`, random support `3`, noise of repetition `r` is `1000 + r`,
//! CV fold shuffle of repetition `r` is `2_000_000 + r`.

mod cv;
mod report;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, RegressionProblem};
use crate::norms::sorted::linear_sequence;

pub use cv::{cross_validate_lambda, cv_solver_config, log_grid, CvOutcome, CvPoint};
pub use report::{
    run_study, FitRecord, LambdaSource, Method, Metrics, RepetitionRecord, SimulationReport, SummaryRow,
};

pub const DESIGN_STREAM: u64 = 0;
pub const SUPPORT_STREAM: u64 = 3;
pub const NOISE_STREAM_BASE: u64 = 1000;
pub const CV_STREAM_BASE: u64 = 2_000_000;

/// Support used by the random scenarios when `p` is large enough.
pub const RANDOM_SUPPORT: [usize; 7] = [154, 129, 276, 29, 233, 240, 402];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Decreasing,
    DecreasingRandom,
    Grouped,
    GroupedRandom,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Decreasing,
        Scenario::DecreasingRandom,
        Scenario::Grouped,
        Scenario::GroupedRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Decreasing => "decreasing",
            Scenario::DecreasingRandom => "decreasing-random",
            Scenario::Grouped => "grouped",
            Scenario::GroupedRandom => "grouped-random",
        }
    }

    fn values(self) -> [f64; 7] {
        match self {
            Scenario::Decreasing | Scenario::DecreasingRandom => {
                std::array::from_fn(|k| 4.0 - k as f64 / 3.0)
            }
            Scenario::Grouped | Scenario::GroupedRandom => [4.0, 4.0, 4.0, 3.0, 3.0, 2.0, 2.0],
        }
    }

    fn random_support(self) -> bool {
        matches!(self, Scenario::DecreasingRandom | Scenario::GroupedRandom)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// n = 50, p = 100, 20 repetitions.
    Desk,
    /// n = 100, p = 500, 100 repetitions.
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::InvalidConfig(format!("unknown profile {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    /// `Sigma_ij = rho^|i - j|`.
    pub rho: f64,
    pub sigma: f64,
    pub repetitions: usize,
    pub scenario: Scenario,
    pub seed: u64,
    pub cv_folds: usize,
    pub cv_grid_size: usize,
    /// Grid spans `[lo, hi]` times the theoretical level, log spaced.
    pub cv_grid_range: (f64, f64),
    /// Confidence level used for the theoretical penalty.
    pub alpha: f64,
    /// Weights of the sorted-l1 penalty and metric; `None` is `1 -> 0.1` of length `p`.
    pub sorted_l1_seq: Option<Vec<f64>>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 500,
            rho: 0.9,
            sigma: 1.0,
            repetitions: 100,
            scenario: Scenario::Decreasing,
            seed: 0,
            cv_folds: 8,
            cv_grid_size: 30,
            cv_grid_range: (0.01, 2.0),
            alpha: 0.05,
            sorted_l1_seq: None,
        }
    }
}

impl SimulationConfig {
    pub fn profile(profile: Profile, scenario: Scenario, seed: u64) -> Self {
        let base = Self {
            scenario,
            seed,
            ..Self::default()
        };
        match profile {
            Profile::Full => base,
            Profile::Desk => Self {
                n: 50,
                p: 100,
                repetitions: 20,
                ..base
            },
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sorted_l1_seq
            .clone()
            .unwrap_or_else(|| linear_sequence(1.0, 0.1, self.p))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.p < 7 {
            return bad(format!("scenarios have 7 active coefficients, so p must be at least 7, got {}", self.p));
        }
        if self.cv_folds < 2 || self.cv_folds > self.n {
            return bad(format!("cv_folds must lie in 2..=n, got {}", self.cv_folds));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if self.cv_grid_size == 0 {
            return bad("cv_grid_size must be at least 1".into());
        }
        let (lo, hi) = self.cv_grid_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("cv_grid_range must satisfy 0 < lo <= hi, got ({lo}, {hi})"));
        }
        if let Some(seq) = &self.sorted_l1_seq {
            if seq.len() != self.p {
                return Err(Error::DimensionMismatch {
                    what: "sorted_l1_seq length (p)",
                    expected: self.p,
                    found: seq.len(),
                });
            }
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n x p` matrix whose rows are i.i.d. `N(0, Sigma)`, `Sigma_ij = rho^|i-j|`.
pub fn toeplitz_design(n: usize, p: usize, rho: f64, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let cov = DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32));
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig(format!("Toeplitz covariance with rho = {rho} is not positive definite")))?;
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    // rows z_i L^T have covariance L L^T
    Ok(z * chol.l().transpose())
}

/// Coefficient vector for a scenario. Random scenarios use the fixed support
/// when `p > 402` and a seeded random 7-subset otherwise.
pub fn true_coefficients(scenario: Scenario, p: usize, seed: u64) -> Result<Vec<f64>> {
    if p < 7 {
        return Err(Error::InvalidConfig(format!("p must be at least 7, got {p}")));
    }
    let support: Vec<usize> = if !scenario.random_support() {
        (0..7).collect()
    } else if p > *RANDOM_SUPPORT.iter().max().unwrap() {
        RANDOM_SUPPORT.to_vec()
    } else {
        sample(&mut stream_rng(seed, SUPPORT_STREAM), p, 7).into_vec()
    };
    let mut beta = vec![0.0; p];
    for (&j, v) in support.iter().zip(scenario.values()) {
        beta[j] = v;
    }
    Ok(beta)
}

/// The fixed design of the study and the response of repetition `rep`.
pub fn generate_problem(config: &SimulationConfig, rep: usize) -> Result<(RegressionProblem, GroundTruth)> {
    config.validate()?;
    let x = toeplitz_design(config.n, config.p, config.rho, &mut stream_rng(config.seed, DESIGN_STREAM))?;
    realize(config, &x, rep)
}

pub(crate) fn realize(config: &SimulationConfig, x: &DMatrix<f64>, rep: usize) -> Result<(RegressionProblem, GroundTruth)> {
    let beta0 = true_coefficients(config.scenario, config.p, config.seed)?;
    let mut rng = stream_rng(config.seed, NOISE_STREAM_BASE + rep as u64);
    let noise = DVector::from_fn(config.n, |_, _| config.sigma * rng.sample::<f64, _>(StandardNormal));
    let y = x * DVector::from_column_slice(&beta0) + &noise;
    let problem = RegressionProblem::new(x.clone(), y)?;
    let truth = GroundTruth::new(beta0, config.sigma, noise.as_slice().to_vec())?;
    Ok((problem, truth))
}
