use thiserror::Error;

pub type Result<T> = std::result::Result<T, ZenoError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZenoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not a projector: {reason}")]
    NotProjector { reason: String },

    #[error("state is not normalized (| |psi| - 1 | = {residual:e})")]
    NotNormalized { residual: f64 },

    #[error("measurement outcome impossible: probability {probability:e}")]
    ImpossibleOutcome { probability: f64 },

    #[error("measurement outcome impossible at step {step} (t = {t}): probability {probability:e}")]
    ImpossibleOutcomeAt { step: usize, t: f64, probability: f64 },

    #[error("time {t} lies outside the horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("initial state is not confined to the measured subspace (|E psi0 - psi0| = {residual:e})")]
    InitialCondition { residual: f64 },

    #[error("effective Hamiltonian at t = {t} is not Hermitian (residual {residual:e})")]
    EffectiveNotHermitian { t: f64, residual: f64 },

    #[error("gauge generator does not commute with the base projector at t = {t} (residual {residual:e})")]
    GaugePrecondition { t: f64, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
