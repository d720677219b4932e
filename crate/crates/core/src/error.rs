use alloc::boxed::Box;
use alloc::string::String;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid bipartition: l_A = {l_a} must lie in 1..={max} for L = {l}", max = .l - 1)]
    InvalidBipartition { l_a: usize, l: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Spectra left the physical range by more than the tolerance.
    #[error(
        "numerical degradation: max imaginary part {max_imag:.3e}, max range excess {max_excess:.3e}"
    )]
    NumericalDegradation { max_imag: f64, max_excess: f64 },

    /// `1 + Gamma_+ Gamma_-` is numerically singular.
    #[error("ill-conditioned linear system (pivot ratio {pivot_ratio:.3e})")]
    Conditioning { pivot_ratio: f64 },

    #[error("Fock-space oracle supports L <= {max}, got L = {l}")]
    DimensionGuard { l: usize, max: usize },

    #[error("oracle disagreement at mode {mode}: outcome {outcome} has Born probability {probability:.3e}")]
    OracleDisagreement { mode: usize, outcome: u8, probability: f64 },

    #[error("insufficient data for {what}: need {needed}, got {got}")]
    InsufficientData { what: &'static str, needed: usize, got: usize },

    #[error("singular design matrix in {what}")]
    SingularDesign { what: &'static str },

    #[error("grid is not uniformly spaced (step {expected} vs {found} at index {index})")]
    NonUniformGrid { expected: f64, found: f64, index: usize },

    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("trajectory {index} (seed {seed:#018x}) failed: {source}")]
    Trajectory { index: usize, seed: u64, source: Box<Error> },

    #[error("{failed} of {total} trajectories failed; first failure: {first}")]
    EnsembleFailed { failed: usize, total: usize, first: Box<Error> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn params(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams { field, reason: reason.into() }
    }
}
