//! Theoretical quantities: empirical noise levels, effective sparsity,
//! oracle certificates, penalty levels and probability bounds.

pub mod certificate;
pub mod lambda;
pub mod levels;
pub mod sparsity;

pub use certificate::{
    best_oracle_point, oracle_certificate, project_onto_set, CertificateOptions, OracleCertificate, OraclePoint,
};
pub use lambda::{
    noise_norm_bound, noise_norm_bound_c, probability_bound, theoretical_lambda, Calibration,
    ProbabilityBoundParams, StructuredInputs, TheoreticalLambda,
};
pub use levels::{empirical_levels, EmpiricalLevels};
pub use sparsity::{effective_sparsity, EffectiveSparsity, SparsityOptions};
