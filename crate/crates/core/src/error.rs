use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: u128, found: u128 },
    #[error("size budget exceeded: {what} needs {needed}, budget {budget}")]
    BudgetExceeded { what: String, needed: u128, budget: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("zero state has no Rayleigh quotient")]
    ZeroState,
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("iteration cap reached after {iterations} sweeps (last change {last_change:e})")]
    IterationCap { iterations: usize, last_change: f64 },
    #[error("localization failed: {0}")]
    Localization(String),
    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
