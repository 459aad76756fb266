//! Scheme execution as a resumable state machine.
//!
//! The posterior is tracked as a function of `ℵ = φ − Φ₁`: every feedback
//! phase is chosen relative to `Φ₁` and the physical phase is recovered by
//! adding it back. A run with `(φ + δ, Φ₁ + δ)` and the same outcomes thus
//! performs bit-identical likelihood arithmetic.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::posterior::{BranchPreview, FeedbackPhase, Outcome, PhaseLikelihood};
use crate::scalar::Real;

use super::record::{TracePoint, TrialRecord};
use super::sampler::OutcomeSource;
use super::spec::{HybridIncrement, PhaseGrid, SchemeSpec, SizeObjective};

/// Most candidate sizes examined per size-adaptive step.
pub const MAX_CANDIDATES: usize = 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Fixed truncation order. `None` keeps exactly the harmonics that can
    /// still reach harmonic 1 at level 0 given the remaining detections.
    pub max_order: Option<usize>,
    /// Record intermediate estimates after every level-0 detection.
    pub record_trace: bool,
    /// Keep `c_0` equal to the branch probability instead of rescaling it by
    /// powers of two to avoid underflow in long runs.
    pub absolute_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    /// Feedback from the posterior one level up, before rescaling.
    First,
    /// Maximize the expected sharpness at the current level.
    Maximize,
    /// Predetermined phase.
    Fixed,
}

#[derive(Debug, Clone, Copy)]
struct Step<T> {
    level: u32,
    policy: Policy,
    /// Relative phase for `Fixed`, fallback for uninformative adaptive feedback.
    phase: T,
    /// Resources of this and all later detections.
    remaining: u64,
}

#[derive(Debug, Clone)]
enum Program<T> {
    Fixed {
        steps: Arc<[Step<T>]>,
        cursor: usize,
    },
    Sized {
        budget: u64,
        warmup: u64,
        objective: SizeObjective,
        stalled: bool,
    },
}

#[derive(Debug, Clone, Copy)]
struct Pending<T> {
    nu: u64,
    relative: FeedbackPhase<T>,
}

/// One trial in progress. Cloning forks the run (used for exact enumeration).
#[derive(Debug, Clone)]
pub struct Run<T: Real> {
    phi_true: T,
    phi1: T,
    likelihood: PhaseLikelihood<T>,
    program: Program<T>,
    pending: Option<Pending<T>>,
    outcomes: Vec<Outcome>,
    sizes: Vec<u64>,
    feedback: Vec<T>,
    resources: u64,
    trace: Vec<TracePoint<T>>,
    options: RunOptions,
}

fn build_steps<T: Real>(spec: &SchemeSpec) -> Vec<Step<T>> {
    let top = spec.top_level().unwrap_or(0);
    let mut steps = Vec::new();
    for (level, count) in spec.levels() {
        let scale = T::from_u64(1u64 << level).unwrap();
        let count_t = T::from_usize(count).unwrap();
        for m in 0..count {
            let m_t = T::from_usize(m).unwrap();
            let half_grid = m_t * T::PI() / (count_t * scale);
            let (policy, phase) = match *spec {
                SchemeSpec::GeneralizedQpea { .. } | SchemeSpec::FixedK { .. } => {
                    (if m == 0 { Policy::First } else { Policy::Maximize }, half_grid)
                }
                SchemeSpec::Nonadaptive { grid, .. } => {
                    let phase = match grid {
                        PhaseGrid::HalfPeriod => half_grid,
                        PhaseGrid::FullPeriod => half_grid * T::c(2.0),
                    };
                    (Policy::Fixed, phase)
                }
                SchemeSpec::Hybrid { .. } => (Policy::First, T::zero()),
                SchemeSpec::AdaptiveSize { .. } => unreachable!("no fixed levels"),
            };
            steps.push(Step {
                level,
                policy,
                phase,
                remaining: 0,
            });
        }
    }
    if let SchemeSpec::Hybrid { m, increment, .. } = *spec {
        let inc = match increment {
            HybridIncrement::PiOverM => T::PI() / T::from_usize(m.max(1)).unwrap(),
            HybridIncrement::PiOverTwo => T::FRAC_PI_2(),
        };
        for j in 0..m {
            steps.push(Step {
                level: 0,
                policy: Policy::Fixed,
                phase: (inc * T::from_usize(j).unwrap()).wrap_angle(),
                remaining: 0,
            });
        }
    }
    let mut acc = 0u64;
    for s in steps.iter_mut().rev() {
        acc += 1u64 << s.level;
        s.remaining = acc;
    }
    debug_assert!(steps.first().is_none_or(|s| s.level == top));
    steps
}

impl<T: Real> Run<T> {
    pub fn new(spec: &SchemeSpec, phi_true: T, phi1: T, options: RunOptions) -> Result<Self> {
        spec.validate()?;
        if !phi_true.is_finite() || !phi1.is_finite() {
            return Err(Error::NonFinitePhase);
        }
        let (program, likelihood) = match *spec {
            SchemeSpec::AdaptiveSize {
                budget,
                warmup,
                objective,
            } => {
                let order = options.max_order.unwrap_or(1 + budget as usize);
                let l = PhaseLikelihood::flat(order, 0)?;
                (
                    Program::Sized {
                        budget,
                        warmup,
                        objective,
                        stalled: false,
                    },
                    l,
                )
            }
            _ => {
                let steps: Arc<[Step<T>]> = build_steps(spec).into();
                let top = spec.top_level().unwrap_or(0) + 1;
                let total = steps.first().map_or(0, |s| s.remaining);
                let order = options.max_order.unwrap_or_else(|| window(top, total));
                let l = PhaseLikelihood::flat(order, top)?;
                (Program::Fixed { steps, cursor: 0 }, l)
            }
        };
        Ok(Self {
            phi_true,
            phi1: phi1.wrap_angle(),
            likelihood,
            program,
            pending: None,
            outcomes: Vec::new(),
            sizes: Vec::new(),
            feedback: Vec::new(),
            resources: 0,
            trace: Vec::new(),
            options,
        })
    }

    pub fn likelihood(&self) -> &PhaseLikelihood<T> {
        &self.likelihood
    }

    pub fn phi1(&self) -> T {
        self.phi1
    }

    pub fn resources(&self) -> u64 {
        self.resources
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Physical feedback phases used so far.
    pub fn feedback_phases(&self) -> &[T] {
        &self.feedback
    }

    pub fn is_complete(&self) -> bool {
        if self.pending.is_some() {
            return false;
        }
        match &self.program {
            Program::Fixed { steps, cursor } => *cursor >= steps.len(),
            Program::Sized { budget, stalled, .. } => *stalled || self.resources >= *budget,
        }
    }

    fn order(&self, level: u32, remaining: u64) -> usize {
        self.options.max_order.unwrap_or_else(|| window(level, remaining))
    }

    /// Size and physical feedback phase of the next detection, or `None` when
    /// the run is complete. Idempotent until [`Run::record`] is called.
    pub fn next_measurement(&mut self) -> Result<Option<(u64, FeedbackPhase<T>)>> {
        if let Some(p) = self.pending {
            return Ok(Some((p.nu, p.relative.shifted(self.phi1))));
        }
        let next = match &self.program {
            Program::Fixed { steps, cursor } => match steps.get(*cursor).copied() {
                Some(step) => Some(self.prepare_fixed(step)?),
                None => None,
            },
            Program::Sized {
                budget,
                warmup,
                objective,
                ..
            } => {
                let (budget, warmup, objective) = (*budget, *warmup, *objective);
                if self.resources >= budget {
                    None
                } else {
                    let order = self.options.max_order.unwrap_or(1 + (budget - self.resources) as usize);
                    self.likelihood = std::mem::replace(&mut self.likelihood, dummy()).truncated(order)?;
                    let done = self.sizes.len() as u64;
                    if done < warmup {
                        let phase = T::FRAC_PI_2() * T::from_u64(done).unwrap();
                        Some(Pending {
                            nu: 1,
                            relative: FeedbackPhase::new(phase)?,
                        })
                    } else {
                        let chosen = self.choose_size(budget, order, objective)?;
                        if chosen.is_none() {
                            if let Program::Sized { stalled, .. } = &mut self.program {
                                *stalled = true;
                            }
                        }
                        chosen
                    }
                }
            }
        };
        self.pending = next;
        Ok(next.map(|p| (p.nu, p.relative.shifted(self.phi1))))
    }

    fn prepare_fixed(&mut self, step: Step<T>) -> Result<Pending<T>> {
        let nu = 1u64 << step.level;
        let mut first = None;
        if self.likelihood.level() > step.level {
            if step.policy == Policy::First {
                first = Some(self.likelihood.optimal_feedback());
            }
            while self.likelihood.level() > step.level {
                let order = self.order(self.likelihood.level() - 1, step.remaining);
                let l = std::mem::replace(&mut self.likelihood, dummy());
                self.likelihood = l.truncated(order)?.rescale()?;
            }
        }
        let order = self.order(step.level, step.remaining);
        self.likelihood = std::mem::replace(&mut self.likelihood, dummy()).truncated(order)?;
        let default = FeedbackPhase::new(step.phase)?;
        let relative = match step.policy {
            Policy::Fixed => default,
            Policy::First => match first {
                Some(f) => f.or(default),
                None => self.likelihood.maximize_expected_sharpness(nu, 1)?.or(default),
            },
            Policy::Maximize => self.likelihood.maximize_expected_sharpness(nu, 1)?.or(default),
        };
        Ok(Pending { nu, relative })
    }

    fn choose_size(&self, budget: u64, order: usize, objective: SizeObjective) -> Result<Option<Pending<T>>> {
        let used = self.resources;
        let cap = used.div_ceil(3).min(budget - used).min(order as u64);
        let step = used.div_ceil(100).max(1);
        let l = &self.likelihood;
        let c0 = l.branch_weight();
        let mut best: Option<(T, Pending<T>)> = None;
        for i in 0..MAX_CANDIDATES as u64 {
            let nu = 1 + i * step;
            if nu > cap {
                break;
            }
            let fb = match objective {
                SizeObjective::VhN2 => l.maximize_expected_sharpness(nu, 1)?,
                SizeObjective::EntropyC { .. } | SizeObjective::EntropyEqualprob => l.equal_probability_feedback(nu)?,
            }
            .or(FeedbackPhase::zero());
            let preview = l.predict(fb, nu, 1)?;
            let n_after = T::from_u64(used + nu).unwrap();
            let value = size_objective(objective, &preview, c0, n_after);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, Pending { nu, relative: fb }));
            }
        }
        Ok(best.map(|(_, p)| p))
    }

    /// Supplies the result of the pending detection.
    pub fn record(&mut self, u: Outcome) -> Result<()> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidState("no detection pending".into()))?;
        let next = self.likelihood.update(u, p.relative, p.nu)?;
        self.likelihood = if self.options.absolute_weights { next } else { next.renormalized() };
        self.outcomes.push(u);
        self.sizes.push(p.nu);
        self.feedback.push((p.relative.value() + self.phi1).wrap_angle());
        self.resources += p.nu;
        if let Program::Fixed { cursor, .. } = &mut self.program {
            *cursor += 1;
        }
        if self.options.record_trace && self.likelihood.level() == 0 {
            let estimate = self.current_estimate()?;
            let sharpness = self.likelihood.sharpness()?;
            self.trace.push(TracePoint {
                resources: self.resources,
                estimate,
                sharpness,
            });
        }
        Ok(())
    }

    /// Physical estimate from the current level-0 posterior, `Φ₁` when it is flat.
    fn current_estimate(&self) -> Result<T> {
        let relative = match self.likelihood.phase_estimate() {
            Ok(e) => e,
            Err(Error::AmbiguousEstimate) => T::zero(),
            Err(e) => return Err(e),
        };
        Ok((relative + self.phi1).wrap_angle())
    }

    /// Brings the posterior to level 0 (only needed for runs without detections).
    fn settle(&mut self) -> Result<()> {
        while self.likelihood.level() > 0 {
            self.likelihood = self.likelihood.rescale()?;
        }
        Ok(())
    }

    /// Final posterior once the run is complete.
    pub fn final_likelihood(&mut self) -> Result<&PhaseLikelihood<T>> {
        if !self.is_complete() {
            return Err(Error::InvalidState("run not complete".into()));
        }
        self.settle()?;
        Ok(&self.likelihood)
    }

    pub fn finish(mut self) -> Result<TrialRecord<T>> {
        self.final_likelihood()?;
        let estimate = self.current_estimate()?;
        let final_sharpness = self.likelihood.sharpness()?;
        Ok(TrialRecord {
            phi_true: self.phi_true,
            phi1: self.phi1,
            relative_phase: (self.phi_true - self.phi1).wrap_angle(),
            outcomes: self.outcomes,
            sizes: self.sizes,
            feedback: self.feedback,
            resources: self.resources,
            estimate,
            final_sharpness,
            trace: self.trace,
        })
    }
}

/// Harmonics at `level` that can still reach harmonic 1 at level 0 after
/// `remaining` more resources.
fn window(level: u32, remaining: u64) -> usize {
    let w = (1 + remaining).checked_shr(level).unwrap_or(0);
    (w as usize).max(1)
}

fn dummy<T: Real>() -> PhaseLikelihood<T> {
    PhaseLikelihood::flat(1, 0).expect("order 1 is valid")
}

fn size_objective<T: Real>(objective: SizeObjective, preview: &[BranchPreview<T>; 2], c0: T, n_after: T) -> T {
    match objective {
        SizeObjective::VhN2 => {
            let mut vh = T::zero();
            for b in preview {
                if b.weight > T::zero() {
                    let branch = if b.target_modulus > T::zero() {
                        (b.weight / b.target_modulus).powi(2) - T::one()
                    } else {
                        T::infinity()
                    };
                    vh = vh + b.weight / c0 * branch;
                }
            }
            vh * n_after * n_after
        }
        SizeObjective::EntropyC { c } => (expected_entropy(preview, c0) + T::c(c)) / n_after.ln(),
        SizeObjective::EntropyEqualprob => expected_entropy(preview, c0) + T::c(2.0) * n_after.ln(),
    }
}

/// `⟨S⟩` with `S ≈ ½[1 + ln 2π + ln V_C]` per branch.
fn expected_entropy<T: Real>(preview: &[BranchPreview<T>; 2], c0: T) -> T {
    let base = T::one() + T::TAU().ln();
    let mut s = T::zero();
    for b in preview {
        if b.weight > T::zero() {
            let vc = (T::c(2.0) * (T::one() - b.target_modulus / b.weight)).max(T::min_positive_value());
            s = s + b.weight / c0 * T::c(0.5) * (base + vc.ln());
        }
    }
    s
}

/// Runs `spec` to completion, drawing outcomes from `source`.
pub fn run_trial<T: Real, S: OutcomeSource<T> + ?Sized>(
    spec: &SchemeSpec,
    phi_true: T,
    phi1: T,
    source: &mut S,
    options: RunOptions,
) -> Result<TrialRecord<T>> {
    let mut run = Run::new(spec, phi_true, phi1, options)?;
    while let Some((nu, phase)) = run.next_measurement()? {
        let u = source.outcome(nu, phase)?;
        run.record(u)?;
    }
    run.finish()
}
