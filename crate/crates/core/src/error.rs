use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule needs at least one step")]
    ZeroSteps,
    #[error("beta range must satisfy 0 < start <= end < 1, got [{beta_start}, {beta_end}]")]
    InvalidRange { beta_start: f64, beta_end: f64 },
    #[error("beta_{index} = {value} is outside (0, 1)")]
    BetaOutOfRange { index: usize, value: f64 },
    #[error("step {step} outside 1..={n_steps}")]
    StepOutOfRange { step: usize, n_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MbdError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("every candidate at step {step} has zero weight")]
    AllRejected { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: usize },
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no path found after {iterations} iterations")]
    NoPathFound { iterations: usize },
    #[error("{0} lies inside the forbidden region")]
    EndpointBlocked(&'static str),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
}
