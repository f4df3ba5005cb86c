//! Both sides of the sharp oracle inequality, evaluated on a concrete instance.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::levels::{empirical_levels, EmpiricalLevels};
use super::sparsity::{effective_sparsity, EffectiveSparsity, SparsityOptions};
use crate::error::{Error, Result};
use crate::model::RegressionProblem;
use crate::norms::{ComplementNorm, Norm};
use crate::solver::FitResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateOptions {
    /// Free parameter in `[0, 1)`.
    pub delta: f64,
    pub sparsity: SparsityOptions,
    /// `(sigma, C)`: also report the right side with `||eps||^2_n` replaced by `sigma^2 C`.
    pub noise_substitution: Option<(f64, f64)>,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            delta: 0.5,
            sparsity: SparsityOptions::default(),
            noise_substitution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCertificate {
    pub set: Vec<usize>,
    pub lambda: f64,
    pub levels: EmpiricalLevels,
    pub lambda_star: f64,
    pub lambda_tilde: f64,
    /// Undefined unless `lambda_star > lambda_m`.
    pub l_s: Option<f64>,
    pub gamma_sq: Option<f64>,
    pub sparsity: Option<EffectiveSparsity>,
    pub delta: f64,
    pub a_const: f64,
    /// `||X(beta - beta0)||^2_n`.
    pub approximation_error: f64,
    /// `||X(beta_hat - beta0)||^2_n`.
    pub prediction_error: f64,
    /// `Omega(beta_hat_S - beta)`.
    pub omega_s_error: f64,
    /// `Omega^{S^c}(beta_hat_{S^c})`.
    pub omega_sc_error: f64,
    pub lhs: f64,
    pub rhs: Option<f64>,
    /// `(lambda0 / lambda)(1 + 2f) < 1`.
    pub overfitting_ok: bool,
    /// Overfitting condition and `a lambda_m < lambda`.
    pub assumptions_ok: bool,
    /// `lambda_m / lambda`.
    pub c_const: f64,
    pub c1: f64,
    pub c2: Option<f64>,
    /// `omega_s_error + omega_sc_error <= rhs / (2 delta ||eps||_n (lambda_star - lambda_m))`.
    pub estimation_bound: Option<f64>,
    /// `approximation_error + C1 lambda^2 Gamma^2`.
    pub corollary_prediction_bound: Option<f64>,
    /// `C2 (approximation_error / lambda + C1 lambda Gamma^2)`.
    pub corollary_estimation_bound: Option<f64>,
    /// Right side with `||eps||^2_n` replaced by `sigma^2 C`.
    pub rhs_noise_substituted: Option<f64>,
}

impl OracleCertificate {
    /// True when the bound is claimed and holds.
    pub fn holds(&self) -> Option<bool> {
        if !self.assumptions_ok {
            return None;
        }
        self.rhs.map(|r| self.lhs <= r)
    }
}

fn pred_sq(x: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let v = x * d;
    v.norm_squared() / x.nrows() as f64
}

/// Evaluates the oracle inequality at `beta` (supported in `s`) for a converged fit.
#[allow(clippy::too_many_arguments)]
pub fn oracle_certificate(
    problem: &RegressionProblem,
    norm: &Norm,
    s: &[usize],
    beta: &DVector<f64>,
    beta0: &DVector<f64>,
    noise: &DVector<f64>,
    fit: &FitResult,
    opts: &CertificateOptions,
) -> Result<OracleCertificate> {
    let delta = opts.delta;
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidConfig(format!("delta must lie in [0, 1), got {delta}")));
    }
    problem.check_beta(beta)?;
    if !fit.converged {
        return Err(Error::NotConverged {
            kkt_residual: fit.kkt_residual,
        });
    }
    let beta_hat = fit.beta_vec();
    problem.check_beta(&beta_hat)?;
    let lambda = fit.lambda;
    let comp = ComplementNorm::new(norm, s)?;
    if let Some(j) = comp.complement_set().iter().find(|&&j| beta[j] != 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta has a nonzero entry at index {j} outside the set"
        )));
    }
    let levels = empirical_levels(problem, norm, s, beta0, noise, lambda)?;
    let sigma = levels.noise_norm_n;
    let f = levels.f;
    let lm = levels.lambda_m;

    let lambda_star = lambda * (1.0 - levels.lambda0 / lambda * (1.0 + 2.0 * f)) / (f + 2.0);
    let lambda_tilde = lambda * (1.0 + f);
    let a_const = 3.0 * (1.0 + f);
    let c_const = lm / lambda;
    let overfitting_ok = levels.overfitting_condition(lambda);
    let assumptions_ok = overfitting_ok && a_const * lm < lambda;

    let approximation_error = pred_sq(problem.x(), &(beta - beta0));
    let prediction_error = pred_sq(problem.x(), &(&beta_hat - beta0));
    let diff_s: Vec<f64> = comp
        .pad_allowed(beta_hat.as_slice())
        .iter()
        .zip(beta.iter())
        .map(|(a, b)| a - b)
        .collect();
    let omega_s_error = norm.value(&diff_s);
    let omega_sc_error = comp.value(&comp.restrict_complement(beta_hat.as_slice()));
    let lhs = prediction_error
        + 2.0 * delta * sigma * ((lambda_star + lm) * omega_s_error + (lambda_star - lm) * omega_sc_error);

    let l_s = (lambda_star > lm).then(|| (lambda_tilde + lm) / (lambda_star - lm) * (1.0 + delta) / (1.0 - delta));
    let (gamma_sq, sparsity) = match l_s {
        None => (None, None),
        // Omega(b_S) = 1 has no solution, so the minimum is infinite and Gamma^2 = 0.
        Some(_) if s.is_empty() => (Some(0.0), None),
        Some(l) => {
            let es = effective_sparsity(problem, norm, s, l, &opts.sparsity)?;
            (Some(es.gamma_sq), Some(es))
        }
    };
    let penalty_sq = ((1.0 + delta) * (lambda_tilde + lm)).powi(2);
    let rhs = gamma_sq.map(|g| approximation_error + sigma * sigma * penalty_sq * g);
    let rhs_noise_substituted = match (opts.noise_substitution, gamma_sq) {
        (Some((sd, c)), Some(g)) => Some(approximation_error + sd * sd * c * penalty_sq * g),
        _ => None,
    };
    let estimation_bound = match rhs {
        Some(r) if delta > 0.0 && lambda_star > lm => Some(r / (2.0 * delta * sigma * (lambda_star - lm))),
        _ => None,
    };

    let c1 = (1.0 + delta).powi(2) * sigma * sigma * (f + c_const + 1.0).powi(2);
    let root = 1.0 - 2.0 * c_const * (1.0 + 2.0 * f);
    let c2 = if delta > 0.0 && root >= 0.0 && root.sqrt() > c_const {
        Some(1.0 / (2.0 * delta * sigma) / (root.sqrt() - c_const))
    } else {
        None
    };
    let corollary_prediction_bound = gamma_sq.map(|g| approximation_error + c1 * lambda * lambda * g);
    let corollary_estimation_bound = match (c2, gamma_sq) {
        (Some(c2), Some(g)) => Some(c2 * (approximation_error / lambda + c1 * lambda * g)),
        _ => None,
    };

    Ok(OracleCertificate {
        set: comp.allowed_set().to_vec(),
        lambda,
        levels,
        lambda_star,
        lambda_tilde,
        l_s,
        gamma_sq,
        sparsity,
        delta,
        a_const,
        approximation_error,
        prediction_error,
        omega_s_error,
        omega_sc_error,
        lhs,
        rhs,
        overfitting_ok,
        assumptions_ok,
        c_const,
        c1,
        c2,
        estimation_bound,
        corollary_prediction_bound,
        corollary_estimation_bound,
        rhs_noise_substituted,
    })
}

/// Least-squares projection of `X beta0` onto the span of `X_S`, embedded in `R^p`.
/// The flag is set when `X_S` is rank deficient and the pseudo-inverse was used.
pub fn project_onto_set(problem: &RegressionProblem, s: &[usize], beta0: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    problem.check_beta(beta0)?;
    let p = problem.p();
    let mut out = DVector::zeros(p);
    if s.is_empty() {
        return Ok((out, false));
    }
    if let Some(&j) = s.iter().find(|&&j| j >= p) {
        return Err(Error::DisallowedSet(format!("index {j} is outside 0..{p}")));
    }
    let xs = problem.x().select_columns(s);
    let target = problem.x() * beta0;
    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * f64::EPSILON * xs.nrows().max(xs.ncols()) as f64;
    let rank = svd.singular_values.iter().filter(|&&v| v > eps).count();
    let coef = svd
        .solve(&target, eps)
        .map_err(|e| Error::InvalidConfig(format!("projection failed: {e}")))?;
    for (k, &j) in s.iter().enumerate() {
        out[j] = coef[k];
    }
    Ok((out, rank < s.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub set: Vec<usize>,
    pub beta: Vec<f64>,
    pub rank_deficient: bool,
    pub certificate: OracleCertificate,
}

/// Minimizes the right side over the supplied candidate sets.
///
/// Candidates whose bound is undefined count as `+inf`. Ties keep the earlier candidate.
#[allow(clippy::too_many_arguments)]
pub fn best_oracle_point(
    problem: &RegressionProblem,
    norm: &Norm,
    candidates: &[Vec<usize>],
    beta0: &DVector<f64>,
    noise: &DVector<f64>,
    fit: &FitResult,
    opts: &CertificateOptions,
) -> Result<OraclePoint> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("candidate set list is empty".into()));
    }
    let mut best: Option<(f64, OraclePoint)> = None;
    for s in candidates {
        let (beta, rank_deficient) = project_onto_set(problem, s, beta0)?;
        if rank_deficient {
            warn!("columns {s:?} are rank deficient; projecting with the pseudo-inverse");
        }
        let cert = oracle_certificate(problem, norm, s, &beta, beta0, noise, fit, opts)?;
        let score = cert.rhs.unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((
                score,
                OraclePoint {
                    set: cert.set.clone(),
                    beta: beta.as_slice().to_vec(),
                    rank_deficient,
                    certificate: cert,
                },
            ));
        }
    }
    Ok(best.expect("nonempty candidates").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::support;
    use crate::norms::NormSpec;
    use crate::solver::{fit_with_norm, SolverConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    struct Instance {
        prob: RegressionProblem,
        beta0: DVector<f64>,
        noise: DVector<f64>,
    }

    fn instance(n: usize, p: usize, seed: u64) -> Instance {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut beta0 = DVector::zeros(p);
        beta0[0] = 1.5;
        beta0[1] = -1.0;
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x * &beta0 + &noise;
        Instance {
            prob: RegressionProblem::new(x, y).unwrap(),
            beta0,
            noise,
        }
    }

    fn fast_opts() -> CertificateOptions {
        CertificateOptions {
            sparsity: SparsityOptions {
                restarts: 6,
                dense_samples: Some(0),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn certify(inst: &Instance, lambda: f64) -> OracleCertificate {
        let norm = NormSpec::L1.build(inst.prob.p()).unwrap();
        let fit = fit_with_norm(&inst.prob, &norm, &SolverConfig::new(lambda)).unwrap();
        let s = support(inst.beta0.as_slice());
        oracle_certificate(&inst.prob, &norm, &s, &inst.beta0, &inst.beta0, &inst.noise, &fit, &fast_opts()).unwrap()
    }

    #[test]
    fn true_beta_has_zero_approximation_term() {
        let inst = instance(60, 6, 1);
        let cert = certify(&inst, 0.9);
        assert_eq!(cert.approximation_error, 0.0);
        assert_relative_eq!(cert.a_const, 3.0 * (1.0 + cert.levels.f));
    }

    #[test]
    fn fields_match_raw_recomputation() {
        let inst = instance(60, 6, 2);
        let norm = NormSpec::L1.build(6).unwrap();
        let fit = fit_with_norm(&inst.prob, &norm, &SolverConfig::new(0.9)).unwrap();
        let s = vec![0, 1];
        let cert = oracle_certificate(&inst.prob, &norm, &s, &inst.beta0, &inst.beta0, &inst.noise, &fit, &fast_opts()).unwrap();

        let n = 60.0;
        let sigma = (inst.noise.norm_squared() / n).sqrt();
        let xe = inst.prob.x().tr_mul(&inst.noise);
        let lambda0 = xe.amax() / (n * sigma);
        let ls = xe[0].abs().max(xe[1].abs()) / (n * sigma);
        let lsc = (2..6).map(|j| xe[j].abs()).fold(0.0, f64::max) / (n * sigma);
        let lm = ls.max(lsc);
        let f = 0.9 * 2.5 / sigma;
        let lstar = 0.9 * (1.0 - lambda0 / 0.9 * (1.0 + 2.0 * f)) / (f + 2.0);
        let ltil = 0.9 * (1.0 + f);
        let bh = fit.beta_vec();
        let pred = (inst.prob.x() * (&bh - &inst.beta0)).norm_squared() / n;
        let os = (bh[0] - 1.5).abs() + (bh[1] + 1.0).abs();
        let osc: f64 = (2..6).map(|j| bh[j].abs()).sum();
        let lhs = pred + 2.0 * 0.5 * sigma * ((lstar + lm) * os + (lstar - lm) * osc);
        assert_relative_eq!(cert.lhs, lhs, max_relative = 1e-10);
        assert_relative_eq!(cert.lambda_star, lstar, max_relative = 1e-10);
        if let (Some(g), Some(rhs)) = (cert.gamma_sq, cert.rhs) {
            let r = sigma * sigma * (1.5 * (ltil + lm)).powi(2) * g;
            assert_relative_eq!(rhs, r, max_relative = 1e-10);
            let ls_expected = (ltil + lm) / (lstar - lm) * 3.0;
            assert_relative_eq!(cert.l_s.unwrap(), ls_expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn split_bounds_follow_from_the_main_inequality() {
        for seed in 0..6 {
            let inst = instance(80, 5, 10 + seed);
            let cert = certify(&inst, 1.2);
            if cert.holds() != Some(true) {
                continue;
            }
            let rhs = cert.rhs.unwrap();
            assert!(cert.prediction_error <= rhs);
            assert!(cert.omega_s_error + cert.omega_sc_error <= cert.estimation_bound.unwrap());
            // corollary prediction form is an algebraic rewrite of the right side
            assert_relative_eq!(cert.corollary_prediction_bound.unwrap(), rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn inequality_holds_when_assumptions_hold() {
        let mut claimed = 0;
        for seed in 0..12 {
            let inst = instance(80, 5, 100 + seed);
            let cert = certify(&inst, 1.2);
            if let Some(ok) = cert.holds() {
                claimed += 1;
                assert!(ok, "lhs {} > rhs {:?}", cert.lhs, cert.rhs);
            }
        }
        assert!(claimed > 0);
    }

    #[test]
    fn small_lambda_leaves_ls_undefined() {
        let inst = instance(40, 6, 3);
        let cert = certify(&inst, 1e-3);
        assert!(!cert.assumptions_ok);
        assert!(cert.l_s.is_none() || cert.lambda_star > cert.levels.lambda_m);
    }

    #[test]
    fn beta_outside_set_is_rejected() {
        let inst = instance(30, 4, 4);
        let norm = NormSpec::L1.build(4).unwrap();
        let fit = fit_with_norm(&inst.prob, &norm, &SolverConfig::new(0.9)).unwrap();
        let r = oracle_certificate(&inst.prob, &norm, &[0], &inst.beta0, &inst.beta0, &inst.noise, &fit, &fast_opts());
        assert!(r.is_err());
    }

    #[test]
    fn projection_recovers_beta0_on_its_support() {
        let inst = instance(30, 6, 5);
        let (b, flag) = project_onto_set(&inst.prob, &[0, 1], &inst.beta0).unwrap();
        assert!(!flag);
        for j in 0..6 {
            assert_relative_eq!(b[j], inst.beta0[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn nested_sets_shrink_the_approximation_term() {
        let inst = instance(30, 6, 6);
        let x = inst.prob.x();
        let (b1, _) = project_onto_set(&inst.prob, &[0], &inst.beta0).unwrap();
        let (b2, _) = project_onto_set(&inst.prob, &[0, 1, 2], &inst.beta0).unwrap();
        assert!(pred_sq(x, &(&b2 - &inst.beta0)) < 1e-20);
        assert!(pred_sq(x, &(&b1 - &inst.beta0)) >= 0.0);
    }

    #[test]
    fn duplicated_column_flags_rank_deficiency() {
        let inst = instance(20, 4, 7);
        let mut x = inst.prob.x().clone();
        let c0 = x.column(0).clone_owned();
        x.set_column(1, &c0);
        let prob = RegressionProblem::new(x, inst.prob.y().clone()).unwrap();
        let (_, flag) = project_onto_set(&prob, &[0, 1], &inst.beta0).unwrap();
        assert!(flag);
    }

    #[test]
    fn best_point_matches_exhaustive_recomputation() {
        let inst = instance(20, 8, 8);
        let norm = NormSpec::L1.build(8).unwrap();
        let fit = fit_with_norm(&inst.prob, &norm, &SolverConfig::new(0.8)).unwrap();
        let cands = vec![vec![0], vec![0, 1], vec![0, 1, 2], vec![1, 3], vec![0, 1, 4, 5]];
        let opts = fast_opts();
        let best = best_oracle_point(&inst.prob, &norm, &cands, &inst.beta0, &inst.noise, &fit, &opts).unwrap();
        let mut scores = Vec::new();
        for s in &cands {
            let (b, _) = project_onto_set(&inst.prob, s, &inst.beta0).unwrap();
            let c = oracle_certificate(&inst.prob, &norm, s, &b, &inst.beta0, &inst.noise, &fit, &opts).unwrap();
            scores.push(c.rhs.unwrap_or(f64::INFINITY));
        }
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(best.certificate.rhs.unwrap_or(f64::INFINITY), min);
        let first = scores.iter().position(|&v| v == min).unwrap();
        assert_eq!(best.set, cands[first]);
    }
}
