use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("gain schedule has length {got}, expected horizon + 1 = {expected}")]
    GainLength { expected: usize, got: usize },

    #[error("terminal gain F_T must be exactly 0, got {0}")]
    TerminalGain(f64),

    #[error("riccati denominator D + B^2 P is not positive at stage {stage}: {value}")]
    RiccatiDenominator { stage: usize, value: f64 },

    #[error("stage index {index} out of range for horizon {horizon}")]
    StageOutOfRange { index: usize, horizon: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration needs {needed} candidates, cap is {cap}")]
    EnumerationCap { needed: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
