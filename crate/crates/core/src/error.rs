use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QbdError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular to working precision (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("iteration did not converge after {iterations} steps (last change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("spectral radius iteration did not converge (last estimate {estimate})")]
    SpectralNonConvergence { estimate: f64 },

    #[error("instance is not positive recurrent (rho = {rho})")]
    Unstable { rho: f64 },

    #[error("N = {n} exceeds the supported cap of {cap} (phase space grows as 2^N = {phases})")]
    Capacity { n: usize, cap: usize, phases: u64 },

    #[error("invalid phase tuple: {0}")]
    InvalidPhase(String),

    #[error("boundary system is rank deficient beyond the expected single deficiency")]
    RankDeficient,

    #[error("quantity is undefined: {0}")]
    Undefined(&'static str),
}

pub type Result<T> = std::result::Result<T, QbdError>;
