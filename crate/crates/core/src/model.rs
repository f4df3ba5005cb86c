//! The linear model `Y = X beta0 + eps`, the scaled norms `||.||_n` and
//! `<.,.>_n`, and residual algebra shared by every other module.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design matrix and response. Immutable after construction; every entry is
/// finite and the shapes agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemDoc", into = "ProblemDoc")]
pub struct RegressionProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

/// On-disk layout of a problem: `x` is stored row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub n: usize,
    pub p: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl RegressionProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "design matrix must have at least one row and one column".into(),
            ));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "response length (n)",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix X"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response Y"));
        }
        Ok(Self { x, y })
    }

    /// Builds a problem from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "design row length (p)",
                    expected: p,
                    found: row.len(),
                });
            }
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_vec(y))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same design, new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y)
    }

    /// Problem restricted to the given rows (used by cross-validation).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Self::new(x, y)
    }

    pub(crate) fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector length (p)",
                expected: self.p(),
                found: beta.len(),
            });
        }
        Ok(())
    }

    /// `X^T v / n`.
    pub fn scaled_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(v) / self.n() as f64
    }
}

impl From<RegressionProblem> for ProblemDoc {
    fn from(problem: RegressionProblem) -> Self {
        let x = problem
            .x
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect();
        ProblemDoc {
            n: problem.n(),
            p: problem.p(),
            x,
            y: problem.y.iter().copied().collect(),
        }
    }
}

impl TryFrom<ProblemDoc> for RegressionProblem {
    type Error = Error;

    fn try_from(doc: ProblemDoc) -> Result<Self> {
        if doc.x.len() != doc.n {
            return Err(Error::DimensionMismatch {
                what: "number of design rows (n)",
                expected: doc.n,
                found: doc.x.len(),
            });
        }
        if let Some(row) = doc.x.iter().find(|r| r.len() != doc.p) {
            return Err(Error::DimensionMismatch {
                what: "design row length (p)",
                expected: doc.p,
                found: row.len(),
            });
        }
        Self::from_rows(&doc.x, doc.y)
    }
}

/// Quantities known only in simulation: the true coefficients, the noise
/// level and the realized noise vector. Fitting never reads these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta0: Vec<f64>,
    pub sigma: f64,
    pub noise: Vec<f64>,
    pub active_set: Vec<usize>,
}

impl GroundTruth {
    pub fn new(beta0: Vec<f64>, sigma: f64, noise: Vec<f64>) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if beta0.iter().chain(noise.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ground truth"));
        }
        let active_set = support(&beta0);
        Ok(Self {
            beta0,
            sigma,
            noise,
            active_set,
        })
    }

    pub fn beta0_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta0)
    }

    pub fn noise_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.noise)
    }
}

/// Indices of the nonzero entries.
pub fn support(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `sqrt(sum v_j^2 / n)` where `n = v.len()`.
pub fn norm_n(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.norm_squared() / v.len() as f64).sqrt()
}

/// `sum u_j v_j / n`.
pub fn inner_n(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    assert_eq!(u.len(), v.len(), "inner_n: length mismatch");
    if u.is_empty() {
        return 0.0;
    }
    u.dot(v) / u.len() as f64
}

/// `Y - X beta`.
pub fn residual(problem: &RegressionProblem, beta: &DVector<f64>) -> Result<DVector<f64>> {
    problem.check_beta(beta)?;
    Ok(problem.y() - problem.x() * beta)
}

/// Unscaled Euclidean prediction error `||X (beta0 - beta_hat)||_2`.
pub fn prediction_error_l2(
    problem: &RegressionProblem,
    beta_hat: &DVector<f64>,
    beta0: &DVector<f64>,
) -> Result<f64> {
    problem.check_beta(beta_hat)?;
    problem.check_beta(beta0)?;
    Ok((problem.x() * (beta0 - beta_hat)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity2(y: [f64; 2]) -> RegressionProblem {
        RegressionProblem::new(DMatrix::identity(2, 2), DVector::from_row_slice(&y)).unwrap()
    }

    #[test]
    fn residual_at_zero_is_response() {
        let p = identity2([3.0, 1.0]);
        let r = residual(&p, &DVector::zeros(2)).unwrap();
        assert_eq!(r, *p.y());
    }

    #[test]
    fn residual_identity_design() {
        let p = identity2([3.0, 1.0]);
        let r = residual(&p, &DVector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(r.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn residual_dimension_error_names_p() {
        let p = identity2([3.0, 1.0]);
        let err = residual(&p, &DVector::zeros(3)).unwrap_err();
        assert!(err.to_string().contains("(p)"), "{err}");
    }

    #[test]
    fn prediction_error_examples() {
        let p = identity2([0.0, 0.0]);
        let b0 = DVector::from_row_slice(&[1.0, 0.0]);
        assert_eq!(prediction_error_l2(&p, &b0, &b0).unwrap(), 0.0);
        assert_eq!(prediction_error_l2(&p, &DVector::zeros(2), &b0).unwrap(), 1.0);
    }

    #[test]
    fn prediction_error_matches_direct_sum() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                0.3, -1.2, 0.5, 1.1, 0.4, -0.7, -0.2, 0.9, 1.3, 0.8, -0.5, 0.1, -1.4, 0.6, 0.2,
            ],
        );
        let p = RegressionProblem::new(x.clone(), DVector::zeros(5)).unwrap();
        let b0 = [1.0, -2.0, 0.5];
        let bh = [0.7, -1.5, 0.0];
        let mut sq = 0.0;
        for i in 0..5 {
            let mut r = 0.0;
            for j in 0..3 {
                r += x[(i, j)] * (b0[j] - bh[j]);
            }
            sq += r * r;
        }
        let got = prediction_error_l2(
            &p,
            &DVector::from_row_slice(&bh),
            &DVector::from_row_slice(&b0),
        )
        .unwrap();
        assert_relative_eq!(got, sq.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_finite_input() {
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(
            RegressionProblem::new(x, DVector::zeros(1)),
            Err(Error::NonFinite(_))
        ));
        let x = DMatrix::identity(1, 1);
        assert!(RegressionProblem::new(x, DVector::from_element(1, f64::INFINITY)).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = RegressionProblem::new(DMatrix::identity(3, 2), DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2, .. }));
    }

    #[test]
    fn scaled_norm_conventions() {
        assert_eq!(norm_n(&DVector::zeros(4)), 0.0);
        let v = DVector::from_row_slice(&[3.0, 4.0]);
        assert_relative_eq!(norm_n(&v), (25.0f64 / 2.0).sqrt());
        assert_relative_eq!(inner_n(&v, &v), 12.5);
    }

    #[test]
    fn ground_truth_support() {
        let t = GroundTruth::new(vec![0.0, 2.0, 0.0, -1.0], 1.0, vec![0.1]).unwrap();
        assert_eq!(t.active_set, vec![1, 3]);
    }

    #[test]
    fn json_roundtrip() {
        let p = identity2([3.0, 1.0]);
        let s = serde_json::to_string(&p).unwrap();
        let back: RegressionProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
