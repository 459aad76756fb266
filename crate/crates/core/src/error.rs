use thiserror::Error;

/// Errors raised by the likelihood, equivalent-state, scheme and Monte Carlo layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("harmonic shift {shift} exceeds truncation order {max_order}")]
    ShiftExceedsOrder { shift: usize, max_order: usize },
    #[error("NOON size {nu} is not a positive multiple of 2^{level}")]
    SizeNotAtLevel { nu: u64, level: u32 },
    #[error("likelihood is already at level 0")]
    AlreadyBaseLevel,
    #[error("phase estimate requires level 0, likelihood is at level {0}")]
    NotBaseLevel(u32),
    #[error("sharpness undefined: branch has zero probability")]
    ImpossibleBranch,
    #[error("phase estimate is ambiguous: first harmonic vanishes")]
    AmbiguousEstimate,
    #[error("feedback phase must be finite")]
    NonFinitePhase,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("outcome source exhausted after {0} outcomes")]
    OutcomesExhausted(usize),
    #[error("enumeration needs {detections} detections, limit is {limit}")]
    TooManyBranches { detections: usize, limit: usize },
    #[error("exact enumeration requires a fixed-sequence scheme")]
    NotEnumerable,
    #[error("branch probabilities sum to {0}, expected 1")]
    ProbabilityLeak(f64),
    #[error("at least {needed} samples required, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty sweep")]
    EmptySweep,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
