use rand::Rng;

use crate::error::{Error, Result};
use crate::posterior::{noon_outcome_prob, FeedbackPhase, Outcome};
use crate::scalar::Real;

/// Supplies the result of each detection a scheme requests.
pub trait OutcomeSource<T> {
    /// Parity of a size-`nu` NOON detection at physical feedback phase `feedback`.
    fn outcome(&mut self, nu: u64, feedback: FeedbackPhase<T>) -> Result<Outcome>;
}

/// Draws a parity bit with probability `½[1 + (-1)^u cos(ν(φ − Φ))]`.
pub fn noon_outcome_sampler<T: Real, R: Rng + ?Sized>(phi_true: T, feedback: FeedbackPhase<T>, nu: u64, rng: &mut R) -> Outcome {
    let p0 = noon_outcome_prob(Outcome::Zero, phi_true, nu, feedback);
    let r = T::from_f64(rng.random::<f64>()).expect("unit float representable");
    Outcome::from_bit(r >= p0)
}

/// Physical detections at a fixed true phase.
pub struct NoonSampler<'a, T, R: ?Sized> {
    phi_true: T,
    rng: &'a mut R,
}

impl<'a, T: Real, R: Rng + ?Sized> NoonSampler<'a, T, R> {
    pub fn new(phi_true: T, rng: &'a mut R) -> Self {
        Self { phi_true, rng }
    }
}

impl<T: Real, R: Rng + ?Sized> OutcomeSource<T> for NoonSampler<'_, T, R> {
    fn outcome(&mut self, nu: u64, feedback: FeedbackPhase<T>) -> Result<Outcome> {
        Ok(noon_outcome_sampler(self.phi_true, feedback, nu, self.rng))
    }
}

/// Replays a recorded outcome sequence.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    bits: &'a [Outcome],
    pos: usize,
}

impl<'a> Replay<'a> {
    pub fn new(bits: &'a [Outcome]) -> Self {
        Self { bits, pos: 0 }
    }
}

impl<T> OutcomeSource<T> for Replay<'_> {
    fn outcome(&mut self, _nu: u64, _feedback: FeedbackPhase<T>) -> Result<Outcome> {
        let u = self.bits.get(self.pos).copied().ok_or(Error::OutcomesExhausted(self.pos))?;
        self.pos += 1;
        Ok(u)
    }
}
