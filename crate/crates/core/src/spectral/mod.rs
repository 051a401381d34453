//! Spectral analysis of the killed label kernels: Perron vectors, conditioned
//! laws, survival asymptotics, subcriticality certificates and classification.

mod certificate;
mod classify;
pub mod closed_form;
mod conditioned;
mod eigen;
mod kernel;

use thiserror::Error;

pub use certificate::{
    best_certificate, certify_subcritical, subcritical_certificate_k3, CertificateRecord,
    TernaryCertificateCheck, K3_LOW_BOUND, K3_TAIL_MASS_BOUND, K3_TAIL_RATIO, K3_TRUNCATION,
};
pub use classify::{classify, CertificateSummary, ClassificationReport, Verdict, MAX_TRUNCATION};
pub use closed_form::{
    critical_limit, generating_function_check, left_equation_residual, qsd_exact, qsd_mean,
    right_eigen_exact, right_equation_residual,
};
pub use conditioned::{
    critical_limits_converged, expected_good_paths, hitting_symmetry_check, iterate_conditioned,
    monotone_ratio_check, ratio_at_four, survival_asymptotics, ConditionedChain, ConditionedLaw,
    HittingSymmetryReport, MonotoneRatioReport, SurvivalAsymptotics,
};
pub use eigen::{dominant_eigen, dominant_eigen_capped, EigenTriple};
pub use kernel::{build_folded_kernel, build_killed_kernel, KilledKernel};

use crate::branching::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("truncation {n_max} must be at least a + 1 = {}", a + 1)]
    TruncationTooSmall { a: Label, n_max: Label },
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("truncation {n_max} too small: doubling it changes survival by {relative_change:e}")]
    TruncationSensitive { n_max: Label, relative_change: f64 },
    #[error("martingale identity violated at step {n} (defect {defect:e})")]
    IdentityViolated { n: usize, defect: f64 },
    #[error("degenerate certificate: {0}")]
    Degenerate(String),
}
