//! Study runner and report formatting.

use std::fmt::Write as _;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_lambda, log_grid};
use super::{realize, stream_rng, toeplitz_design, SimulationConfig, CV_STREAM_BASE, DESIGN_STREAM};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::model::{prediction_error_l2, RegressionProblem};
use crate::norms::{sorted, Norm, NormSpec};
use crate::numeric::l1;
use crate::solver::{fit_with_norm, SolverConfig};
use crate::theory::theoretical_lambda;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SrLasso,
    SrSlope,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SrLasso => "sr-lasso",
            Method::SrSlope => "sr-slope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    Theoretical,
    CrossValidated,
}

impl LambdaSource {
    pub fn name(self) -> &'static str {
        match self {
            LambdaSource::Theoretical => "theoretical",
            LambdaSource::CrossValidated => "cross-validated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `||beta0 - beta_hat||_1`.
    pub l1_error: f64,
    /// `J_w(beta0 - beta_hat)` with the study's sorted-l1 weights.
    pub sorted_l1_error: f64,
    /// `||X(beta0 - beta_hat)||_2`, unscaled.
    pub prediction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: Method,
    pub lambda_source: LambdaSource,
    pub lambda: Option<f64>,
    pub metrics: Option<Metrics>,
    pub converged: bool,
    pub kkt_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub noise_norm_n: f64,
    pub fits: Vec<FitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub lambda_source: LambdaSource,
    /// Repetitions whose fit produced metrics.
    pub valid: usize,
    pub converged: usize,
    pub l1_error: Option<f64>,
    pub sorted_l1_error: Option<f64>,
    pub prediction_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub theoretical_lambda_lasso: f64,
    pub theoretical_lambda_slope: f64,
    pub summary: Vec<SummaryRow>,
    pub repetitions: Vec<RepetitionRecord>,
}

const CELLS: [(Method, LambdaSource); 4] = [
    (Method::SrLasso, LambdaSource::Theoretical),
    (Method::SrSlope, LambdaSource::Theoretical),
    (Method::SrLasso, LambdaSource::CrossValidated),
    (Method::SrSlope, LambdaSource::CrossValidated),
];

struct Setup {
    lasso: Norm,
    slope: Norm,
    weights: Vec<f64>,
    lambda_lasso: f64,
    lambda_slope: f64,
}

fn metrics(problem: &RegressionProblem, beta_hat: &[f64], beta0: &[f64], weights: &[f64]) -> Result<Metrics> {
    let diff: Vec<f64> = beta0.iter().zip(beta_hat).map(|(a, b)| a - b).collect();
    Ok(Metrics {
        l1_error: l1(&diff),
        sorted_l1_error: sorted::value(weights, &diff),
        prediction_error: prediction_error_l2(
            problem,
            &DVector::from_column_slice(beta_hat),
            &DVector::from_column_slice(beta0),
        )?,
    })
}

fn one_fit(
    problem: &RegressionProblem,
    beta0: &[f64],
    setup: &Setup,
    method: Method,
    source: LambdaSource,
    config: &SimulationConfig,
    rep: usize,
) -> FitRecord {
    let (norm, theory) = match method {
        Method::SrLasso => (&setup.lasso, setup.lambda_lasso),
        Method::SrSlope => (&setup.slope, setup.lambda_slope),
    };
    let failed = |lambda: Option<f64>, e: String| FitRecord {
        method,
        lambda_source: source,
        lambda,
        metrics: None,
        converged: false,
        kkt_residual: None,
        error: Some(e),
    };
    let lambda = match source {
        LambdaSource::Theoretical => theory,
        LambdaSource::CrossValidated => {
            let (lo, hi) = config.cv_grid_range;
            let grid = log_grid(lo * theory, hi * theory, config.cv_grid_size);
            match cross_validate_lambda(
                problem,
                norm,
                &grid,
                config.cv_folds,
                config.seed,
                CV_STREAM_BASE + rep as u64,
            ) {
                Ok(out) => out.lambda,
                Err(e) => return failed(None, e.to_string()),
            }
        }
    };
    match fit_with_norm(problem, norm, &SolverConfig::new(lambda)) {
        Ok(fit) => match metrics(problem, &fit.beta_hat, beta0, &setup.weights) {
            Ok(m) => FitRecord {
                method,
                lambda_source: source,
                lambda: Some(lambda),
                metrics: Some(m),
                converged: fit.converged,
                kkt_residual: Some(fit.kkt_residual),
                error: None,
            },
            Err(e) => failed(Some(lambda), e.to_string()),
        },
        // noiseless data: the last iterate is the interpolating fit, keep its metrics
        Err(e @ Error::Interpolation { .. }) => {
            let Error::Interpolation { beta, .. } = &e else { unreachable!() };
            FitRecord {
                metrics: metrics(problem, beta, beta0, &setup.weights).ok(),
                ..failed(Some(lambda), e.to_string())
            }
        }
        Err(e) => failed(Some(lambda), e.to_string()),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(reps: &[RepetitionRecord]) -> Vec<SummaryRow> {
    CELLS
        .iter()
        .map(|&(method, source)| {
            let recs: Vec<&FitRecord> = reps
                .iter()
                .flat_map(|r| &r.fits)
                .filter(|f| f.method == method && f.lambda_source == source)
                .collect();
            let ms: Vec<&Metrics> = recs.iter().filter_map(|f| f.metrics.as_ref()).collect();
            let col = |g: fn(&Metrics) -> f64| mean(&ms.iter().map(|m| g(m)).collect::<Vec<_>>());
            SummaryRow {
                method,
                lambda_source: source,
                valid: ms.len(),
                converged: recs.iter().filter(|f| f.converged).count(),
                l1_error: col(|m| m.l1_error),
                sorted_l1_error: col(|m| m.sorted_l1_error),
                prediction_error: col(|m| m.prediction_error),
            }
        })
        .collect()
}

/// Runs every repetition and aggregates. Per-fit failures are recorded, not raised.
pub fn run_study(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let weights = config.weights();
    let slope_spec = NormSpec::SortedL1 {
        lambda_seq: weights.clone(),
    };
    let setup = Setup {
        lasso: NormSpec::L1.build(config.p)?,
        slope: slope_spec.build(config.p)?,
        lambda_lasso: theoretical_lambda(&NormSpec::L1, config.n, config.p, config.alpha, None)?.lambda,
        lambda_slope: theoretical_lambda(&slope_spec, config.n, config.p, config.alpha, None)?.lambda,
        weights,
    };
    info!(
        "study {}: n {}, p {}, {} repetitions, theoretical lambda {:.6} (lasso) {:.6} (slope)",
        config.scenario, config.n, config.p, config.repetitions, setup.lambda_lasso, setup.lambda_slope
    );
    let x = toeplitz_design(config.n, config.p, config.rho, &mut stream_rng(config.seed, DESIGN_STREAM))?;

    let repetitions = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<RepetitionRecord> {
            let (problem, truth) = realize(config, &x, rep)?;
            let fits: Vec<FitRecord> = CELLS
                .iter()
                .map(|&(m, s)| one_fit(&problem, &truth.beta0, &setup, m, s, config, rep))
                .collect();
            for f in fits.iter().filter(|f| f.error.is_some()) {
                warn!("repetition {rep}, {} at {} lambda: {}", f.method.name(), f.lambda_source.name(), f.error.as_deref().unwrap_or(""));
            }
            Ok(RepetitionRecord {
                repetition: rep,
                noise_norm_n: crate::model::norm_n(&truth.noise_vec()),
                fits,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulationReport {
        config: config.clone(),
        theoretical_lambda_lasso: setup.lambda_lasso,
        theoretical_lambda_slope: setup.lambda_slope,
        summary: summarize(&repetitions),
        repetitions,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl SimulationReport {
    pub fn row(&self, method: Method, source: LambdaSource) -> &SummaryRow {
        self.summary
            .iter()
            .find(|r| r.method == method && r.lambda_source == source)
            .expect("summary has every cell")
    }

    /// Summary table as CSV with a header line.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "method",
            "lambda_source",
            "valid",
            "converged",
            "l1_error",
            "sorted_l1_error",
            "prediction_error",
        ])?;
        for r in &self.summary {
            w.write_record([
                self.config.scenario.name().to_string(),
                r.method.name().to_string(),
                r.lambda_source.name().to_string(),
                r.valid.to_string(),
                r.converged.to_string(),
                opt(r.l1_error),
                opt(r.sorted_l1_error),
                opt(r.prediction_error),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Aligned plain-text table, one block per penalty source.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scenario {}  n {}  p {}  rho {}  sigma {}  repetitions {}  seed {}",
            c.scenario, c.n, c.p, c.rho, c.sigma, c.repetitions, c.seed
        );
        let _ = writeln!(
            s,
            "theoretical lambda: sr-lasso {:.6}, sr-slope {:.6}",
            self.theoretical_lambda_lasso, self.theoretical_lambda_slope
        );
        let f = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        for source in [LambdaSource::Theoretical, LambdaSource::CrossValidated] {
            let _ = writeln!(s, "\n{} lambda", source.name());
            let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>12} {:>8}", "method", "l1", "sorted-l1", "pred-l2", "valid");
            for m in [Method::SrLasso, Method::SrSlope] {
                let r = self.row(m, source);
                let _ = writeln!(
                    s,
                    "{:<10} {:>12} {:>12} {:>12} {:>8}",
                    m.name(),
                    f(r.l1_error),
                    f(r.sorted_l1_error),
                    f(r.prediction_error),
                    r.valid
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simbench::{Profile, Scenario};
    use approx::assert_relative_eq;

    fn tiny(scenario: Scenario, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n: 24,
            p: 12,
            repetitions: 3,
            cv_folds: 3,
            cv_grid_size: 5,
            ..SimulationConfig::profile(Profile::Desk, scenario, seed)
        }
    }

    #[test]
    fn summary_means_match_raw_records() {
        let rep = run_study(&tiny(Scenario::Grouped, 1)).unwrap();
        for row in &rep.summary {
            let vals: Vec<f64> = rep
                .repetitions
                .iter()
                .flat_map(|r| &r.fits)
                .filter(|f| f.method == row.method && f.lambda_source == row.lambda_source)
                .filter_map(|f| f.metrics.as_ref().map(|m| m.prediction_error))
                .collect();
            assert_eq!(vals.len(), row.valid);
            if let Some(m) = row.prediction_error {
                assert_relative_eq!(m, vals.iter().sum::<f64>() / vals.len() as f64, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_reports() {
        let a = run_study(&tiny(Scenario::DecreasingRandom, 9)).unwrap();
        let b = run_study(&tiny(Scenario::DecreasingRandom, 9)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn noiseless_small_lambda_recovers_truth() {
        let cfg = SimulationConfig {
            n: 40,
            p: 10,
            rho: 0.0,
            sigma: 0.0,
            repetitions: 1,
            cv_folds: 4,
            cv_grid_size: 4,
            ..SimulationConfig::profile(Profile::Desk, Scenario::Decreasing, 2)
        };
        let (problem, truth) = crate::simbench::generate_problem(&cfg, 0).unwrap();
        let setup = Setup {
            lasso: NormSpec::L1.build(10).unwrap(),
            slope: NormSpec::SortedL1 { lambda_seq: cfg.weights() }.build(10).unwrap(),
            weights: cfg.weights(),
            lambda_lasso: 1e-3,
            lambda_slope: 1e-3,
        };
        for method in [Method::SrLasso, Method::SrSlope] {
            let rec = one_fit(&problem, &truth.beta0, &setup, method, LambdaSource::Theoretical, &cfg, 0);
            let m = rec.metrics.expect("metrics recorded");
            assert!(m.l1_error < 1e-3, "{m:?}");
            assert!(m.prediction_error < 1e-2, "{m:?}");
        }
    }

    #[test]
    fn csv_and_text_have_every_cell() {
        let rep = run_study(&tiny(Scenario::Grouped, 4)).unwrap();
        let csv = rep.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 5);
        let text = rep.to_text();
        assert!(text.contains("sr-slope") && text.contains("cross-validated"));
        let back: SimulationReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
        assert_eq!(back, rep);
    }
}
