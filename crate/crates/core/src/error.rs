use thiserror::Error;

pub type Result<T> = std::result::Result<T, LvError>;

/// Failures raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LvError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy h = {h} must exceed the fixed-point energy h_min = {h_min}")]
    EnergyBelowMinimum { h: f64, h_min: f64 },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("no return to the section y = 1 within t = {cap}")]
    PeriodNotFound { cap: f64 },

    #[error("state (m = {m}, n = {n}) is on the boundary; interior needs m, n >= 2")]
    BoundaryState { m: u64, n: u64 },

    #[error("could not keep the SDE path positive at t = {t}")]
    StepRejectionLimit { t: f64 },

    #[error("fixed point of the decomposition drift not found (residual {residual:e})")]
    FixedPointNotFound { residual: f64 },

    #[error("averaged noise coefficient vanishes at h = {h}")]
    SingularCoefficient { h: f64 },
}

impl LvError {
    /// Variant name, used by the CLI when reporting numerical failures.
    pub fn name(&self) -> &'static str {
        match self {
            LvError::InvalidParameter(_) => "InvalidParameter",
            LvError::EnergyBelowMinimum { .. } => "EnergyBelowMinimum",
            LvError::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            LvError::StepBudgetExhausted { .. } => "StepBudgetExhausted",
            LvError::PeriodNotFound { .. } => "PeriodNotFound",
            LvError::BoundaryState { .. } => "BoundaryState",
            LvError::StepRejectionLimit { .. } => "StepRejectionLimit",
            LvError::FixedPointNotFound { .. } => "FixedPointNotFound",
            LvError::SingularCoefficient { .. } => "SingularCoefficient",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> LvError {
    LvError::InvalidParameter(msg.into())
}
