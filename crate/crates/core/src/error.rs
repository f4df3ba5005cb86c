use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid norm specification: {0}")]
    InvalidSpec(String),

    #[error("index set not allowed for this norm: {0}")]
    DisallowedSet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The residual vanished, so the estimator reproduces an interpolating
    /// least-squares fit and the square-root KKT conditions are undefined.
    /// `beta` holds the last iterate.
    #[error("overfit/interpolation: residual norm {residual_norm:e} collapsed to zero (overfitting assumption violated)")]
    Interpolation { residual_norm: f64, beta: Vec<f64> },

    #[error("degenerate design: Omega-eigenvalue estimate {delta:e} is numerically zero, effective sparsity blows up")]
    DegenerateDesign { delta: f64 },

    #[error("parameter regime violated: {0}")]
    ParameterRegime(String),

    #[error("solver did not converge: KKT residual {kkt_residual:e}")]
    NotConverged { kkt_residual: f64 },

    #[error("cross-validation failed: every lambda on the grid had a non-converged fit")]
    NoValidLambda,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Interpolation { .. }
                | Error::DegenerateDesign { .. }
                | Error::NoValidLambda
                | Error::NotConverged { .. }
                | Error::ParameterRegime(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::DisallowedSet(_) => "disallowed_set",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Interpolation { .. } => "interpolation",
            Error::DegenerateDesign { .. } => "degenerate_design",
            Error::ParameterRegime(_) => "parameter_regime",
            Error::NoValidLambda => "no_valid_lambda",
            Error::NotConverged { .. } => "not_converged",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
