use thiserror::Error;

/// Errors raised by the numerical layers of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("phi order {0} out of range (0..=6)")]
    PhiOrder(usize),

    #[error("argument must be non-negative, got {0}")]
    NegativeArgument(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: entries ({row},{col}) differ by {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {0:e}")]
    NotPositiveSemiDefinite(f64),

    #[error("Jacobi eigensolver did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("denominator guard tripped for {coefficient} at v = {v}: |denominator| = {denominator:e}")]
    DenominatorGuard {
        coefficient: &'static str,
        v: f64,
        denominator: f64,
    },

    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("stage {stage} did not converge in {iterations} fixed-point iterations")]
    StageNotConverged { stage: usize, iterations: usize },

    #[error("stage {stage} produced a non-finite iterate")]
    NonFiniteIterate { stage: usize },

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stage matrix I + z*A is singular (|det| = {0:e})")]
    SingularStageMatrix(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
