//! Pivotal penalty levels and the Gaussian concentration bounds behind them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormSpec;

/// How `Delta` is tied to `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    /// `Delta^2 = 1 - t sqrt(2/n)`, the form used in the penalty formulas.
    Boxed,
    /// `Delta^2 = 1 - 2 t / sqrt(n)`, the form for which both exponential
    /// terms of the tail bound equal `alpha / 2`.
    Exact,
}

/// Parameters of the concentration event `max(Z_1, Z_2) <= d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBoundParams {
    pub alpha: f64,
    pub t: f64,
    /// `Delta` (not squared).
    pub delta_cap: f64,
    /// Constant with `||b||_2 <= D Omega(b)`.
    pub d_const: f64,
    /// Upper bound on `E[V]`.
    pub ev_bound: f64,
    /// `B_2 = sup_{Omega(b) <= 1} b^T b`, bounded by `D^2`.
    pub b2: f64,
    /// Threshold `d`.
    pub d: f64,
    pub calibration: Option<Calibration>,
}

fn check_alpha(alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParameterRegime(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::ParameterRegime("n must be positive".into()));
    }
    if 2.0 * (-(n as f64) / 2.0).exp() >= alpha {
        return Err(Error::ParameterRegime(format!(
            "2 exp(-n/2) < alpha is violated for n = {n}, alpha = {alpha}"
        )));
    }
    Ok((4.0 / alpha).ln().sqrt())
}

impl ProbabilityBoundParams {
    /// Calibrated parameters for level `alpha` with `B_2 = D^2`.
    pub fn calibrated(alpha: f64, n: usize, d_const: f64, ev_bound: f64, calibration: Calibration) -> Result<Self> {
        let t = check_alpha(alpha, n)?;
        let nf = n as f64;
        let delta_sq = match calibration {
            Calibration::Boxed => 1.0 - t * (2.0 / nf).sqrt(),
            Calibration::Exact => 1.0 - 2.0 * t / nf.sqrt(),
        };
        if delta_sq <= 0.0 {
            return Err(Error::ParameterRegime(format!(
                "Delta^2 = {delta_sq:.6} <= 0 for n = {n}, alpha = {alpha}; increase alpha or n"
            )));
        }
        let delta_cap = delta_sq.sqrt();
        let b2 = d_const * d_const;
        let d = t * (2.0 * b2 / nf).sqrt() / delta_cap + ev_bound;
        Ok(Self {
            alpha,
            t,
            delta_cap,
            d_const,
            ev_bound,
            b2,
            d,
            calibration: Some(calibration),
        })
    }

    /// Free parameters for the general tail bound.
    pub fn general(d: f64, ev_bound: f64, delta_cap: f64, b2: f64) -> Self {
        Self {
            alpha: f64::NAN,
            t: f64::NAN,
            delta_cap,
            d_const: b2.sqrt(),
            ev_bound,
            b2,
            d,
            calibration: None,
        }
    }
}

/// `1 - 2 exp(-(d - EV)^2 Delta^2 / (2 B_2 / n)) - 2 exp(-(n/4)(1 - Delta^2)^2)`.
///
/// Requires `d > EV` and `0 < Delta < 1`; the second term comes from a lower
/// chi-square tail, which only bounds `P(||eps||_n <= sigma Delta)` for `Delta < 1`.
pub fn probability_bound(params: &ProbabilityBoundParams, n: usize) -> Result<f64> {
    let ProbabilityBoundParams {
        d,
        ev_bound,
        delta_cap,
        b2,
        ..
    } = *params;
    if !(d > ev_bound) {
        return Err(Error::ParameterRegime(format!("d > E[V] is violated: d = {d}, E[V] bound = {ev_bound}")));
    }
    if !(delta_cap > 0.0 && delta_cap < 1.0) {
        return Err(Error::ParameterRegime(format!(
            "0 < Delta < 1 is violated: Delta = {delta_cap}"
        )));
    }
    if !(b2 > 0.0) || n == 0 {
        return Err(Error::ParameterRegime("B_2 > 0 and n > 0 are required".into()));
    }
    let nf = n as f64;
    let ds = delta_cap * delta_cap;
    let first = 2.0 * (-(d - ev_bound).powi(2) * ds / (2.0 * b2 / nf)).exp();
    let second = 2.0 * (-(nf / 4.0) * (1.0 - ds).powi(2)).exp();
    Ok(1.0 - first - second)
}

/// Bound on `||eps||_n^2` holding with probability at least `1 - exp(-n x^2)`.
///
/// Returns `(sigma^2 (1 + 2x + 2x^2), 1 - exp(-n x^2))`.
pub fn noise_norm_bound(sigma: f64, n: usize, x: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && x > 0.0) {
        return Err(Error::ParameterRegime("sigma > 0 and x > 0 are required".into()));
    }
    Ok((
        sigma * sigma * (1.0 + 2.0 * x + 2.0 * x * x),
        1.0 - (-(n as f64) * x * x).exp(),
    ))
}

/// The same bound in the form `P(||eps||_n^2 <= sigma^2 C) >= 1 - exp(-(n/2)(C - sqrt(2C - 1)))`.
pub fn noise_norm_bound_c(sigma: f64, n: usize, c: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && c >= 1.0) {
        return Err(Error::ParameterRegime("sigma > 0 and C >= 1 are required".into()));
    }
    Ok((
        sigma * sigma * c,
        1.0 - (-(n as f64) / 2.0 * (c - (2.0 * c - 1.0).sqrt())).exp(),
    ))
}

/// Extra inputs for the structured-sparsity penalty level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredInputs {
    /// Upper bound on the design-dependent factor `A~`.
    pub a_tilde: f64,
    /// Number of extreme points of the normalized cone.
    pub extreme_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalLambda {
    pub lambda: f64,
    /// Group weight for the sparse-group norm.
    pub eta: Option<f64>,
    pub t: f64,
    pub delta_cap: f64,
    pub d_const: f64,
    pub ev_bound: f64,
}

/// Pivotal penalty level at confidence `1 - alpha`.
///
/// For structured norms without `structured` inputs the l1 level is used,
/// valid because those norms dominate l1 and their duals are dominated by l_inf.
pub fn theoretical_lambda(
    spec: &NormSpec,
    n: usize,
    p: usize,
    alpha: f64,
    structured: Option<StructuredInputs>,
) -> Result<TheoreticalLambda> {
    if p == 0 {
        return Err(Error::InvalidConfig("p must be positive".into()));
    }
    let t = check_alpha(alpha, n)?;
    let params = ProbabilityBoundParams::calibrated(alpha, n, 1.0, 0.0, Calibration::Boxed)?;
    let delta_cap = params.delta_cap;
    let scale = (2.0 / n as f64).sqrt();
    let log_root = |v: f64| v.max(1.0).ln().sqrt();
    let ev_l1 = scale * (2.0 + log_root(p as f64));
    let out = |lambda: f64, eta: Option<f64>, d_const: f64, ev_bound: f64| TheoreticalLambda {
        lambda,
        eta,
        t,
        delta_cap,
        d_const,
        ev_bound,
    };
    let lasso = scale * t / delta_cap + ev_l1;
    Ok(match spec {
        NormSpec::L1 => out(lasso, None, 1.0, ev_l1),
        NormSpec::Group { groups } => {
            let ev = scale * (2.0 + log_root(groups.len() as f64));
            out(scale * t / delta_cap + ev, None, 1.0, ev)
        }
        NormSpec::SortedL1 { lambda_seq } => {
            if lambda_seq.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "sorted-l1 weight sequence length (p)",
                    expected: p,
                    found: lambda_seq.len(),
                });
            }
            let last = *lambda_seq.last().expect("p > 0");
            if !(last > 0.0) {
                return Err(Error::InvalidSpec("sorted-l1 weights must be positive".into()));
            }
            let r2: f64 = lambda_seq.iter().map(|w| 1.0 / (w * w)).sum();
            let ev = scale * ((2.0 * 2f64.sqrt() + 1.0) / 2f64.sqrt() + log_root(r2));
            out(scale * t / (last * delta_cap) + ev, None, 1.0 / last, ev)
        }
        NormSpec::SparseGroup { groups, .. } => {
            let eta = scale * (t / delta_cap + 2.0 + log_root(groups.len() as f64));
            out(lasso, Some(eta), 1.0, ev_l1)
        }
        NormSpec::Structured { .. } => match structured {
            None => out(lasso, None, 1.0, ev_l1),
            Some(StructuredInputs { a_tilde, extreme_points }) => {
                if !(a_tilde > 0.0 && extreme_points >= 1.0) {
                    return Err(Error::InvalidConfig(
                        "structured level needs a_tilde > 0 and at least one extreme point".into(),
                    ));
                }
                let ev = scale * a_tilde * (2.0 + log_root(extreme_points));
                out(scale * t / delta_cap + ev, None, 1.0, ev)
            }
        },
    })
}
