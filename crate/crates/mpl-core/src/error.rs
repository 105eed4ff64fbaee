use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("matrix is not Schur stable (spectral radius {0})")]
    Unstable(f64),
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("random generation failed after {0} attempts")]
    GenerationFailed(usize),
    #[error("infeasible quadratic program{}", .step.map(|k| format!(" at step {k}")).unwrap_or_default())]
    Infeasible { step: Option<usize> },
    #[error("active-set iteration limit reached")]
    IterationLimit,
    #[error("attack failed: {0}")]
    AttackFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
