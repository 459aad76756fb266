//! Measurement schemes: fixed NOON sequences with adaptive or predetermined
//! feedback, hybrid QPEA plus single passes, and size-adaptive policies.

mod engine;
mod record;
mod sampler;
mod spec;

pub use engine::{run_trial, Run, RunOptions, MAX_CANDIDATES};
pub use record::{TracePoint, TrialRecord};
pub use sampler::{noon_outcome_sampler, NoonSampler, OutcomeSource, Replay};
pub use spec::{default_entropy_offset, HybridIncrement, PhaseGrid, Schedule, SchemeSpec, SizeObjective, MAX_LEVEL};
