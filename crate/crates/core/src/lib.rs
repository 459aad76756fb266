//! Phase estimation with sequences of NOON-state measurements.
//!
//! - [`posterior`]: Fourier-coefficient likelihoods, Bayesian updates, feedback phases.
//! - [`equivstate`]: exact count tables and canonical variances of equivalent two-mode states.
//! - [`schemes`]: adaptive, nonadaptive, hybrid and size-adaptive measurement schemes.
//! - [`montecarlo`]: exact enumeration and seeded parallel Monte Carlo variance estimates.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

pub mod equivstate;
pub mod error;
pub mod montecarlo;
pub mod posterior;
pub mod scalar;
pub mod schemes;
pub mod variance;

pub use error::{Error, Result};
pub use posterior::{noon_outcome_prob, BranchPreview, Feedback, FeedbackPhase, Outcome, PhaseLikelihood};
pub use equivstate::{CountTable, TwoModeState};
pub use montecarlo::{enumerate_exact, estimate_montecarlo, sweep, Method, VarianceReport};
pub use scalar::Real;
pub use schemes::{run_trial, Run, RunOptions, SchemeSpec, TrialRecord};
pub use variance::Variance;

/// Double-precision likelihood.
pub type Likelihood = PhaseLikelihood<f64>;

/// Double-precision equivalent two-mode state.
pub type State = TwoModeState<f64>;
