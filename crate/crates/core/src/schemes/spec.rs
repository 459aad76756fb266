use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported top level `K` (NOON sizes up to `2^K`).
pub const MAX_LEVEL: u32 = 40;

/// Declarative description of one measurement scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    /// Sizes `2^K, …, 1`, `M` adaptive detections each.
    GeneralizedQpea { k: u32, m: usize },
    /// Same engine as [`SchemeSpec::GeneralizedQpea`], labelled for sweeps
    /// that hold `K` fixed and increase `M`.
    FixedK { k: u32, m: usize },
    /// Sizes `2^K, …, 1` with `M(K, k)` detections at fixed grid phases.
    Nonadaptive {
        k: u32,
        schedule: Schedule,
        #[serde(default)]
        grid: PhaseGrid,
    },
    /// `M = 1` adaptive QPEA followed by `m` single passes at fixed increments.
    Hybrid { k: u32, m: usize, increment: HybridIncrement },
    /// Sizes chosen one detection at a time to optimize `objective`.
    AdaptiveSize {
        budget: u64,
        objective: SizeObjective,
        #[serde(default = "default_warmup")]
        warmup: u64,
    },
}

fn default_warmup() -> u64 {
    10
}

/// Repetitions `M(K, k)` at level `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `a + b (K − k)`.
    Linear { a: usize, b: usize },
    /// `m` at every level.
    Constant { m: usize },
}

impl Schedule {
    pub fn repetitions(self, top: u32, level: u32) -> usize {
        match self {
            Schedule::Linear { a, b } => a + b * (top - level) as usize,
            Schedule::Constant { m } => m,
        }
    }
}

/// Feedback grid of the nonadaptive scheme at a level with `M` repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseGrid {
    /// `2^k Φ = m π / M`.
    #[default]
    HalfPeriod,
    /// `2^k Φ = 2 m π / M`.
    FullPeriod,
}

/// Phase step between successive single passes of the hybrid scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridIncrement {
    #[serde(rename = "pi_over_m")]
    PiOverM,
    #[serde(rename = "pi_over_2")]
    PiOverTwo,
}

/// Quantity minimized when choosing the next NOON size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeObjective {
    /// Expected `V_H N²`, sharpness-maximizing feedback.
    VhN2,
    /// `(⟨S⟩ + C) / ln N`, equal-probability feedback.
    EntropyC {
        #[serde(default = "default_entropy_offset")]
        c: f64,
    },
    /// `⟨S⟩ + 2 ln N`, equal-probability feedback.
    EntropyEqualprob,
}

/// `−ln 2π`.
pub fn default_entropy_offset() -> f64 {
    -std::f64::consts::TAU.ln()
}

impl SchemeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScheme(msg));
        match *self {
            SchemeSpec::GeneralizedQpea { k, m } | SchemeSpec::FixedK { k, m } => {
                if k > MAX_LEVEL {
                    return bad(format!("K = {k} exceeds {MAX_LEVEL}"));
                }
                if m < 1 {
                    return bad("M must be at least 1".into());
                }
            }
            SchemeSpec::Nonadaptive { k, schedule, .. } => {
                if k > MAX_LEVEL {
                    return bad(format!("K = {k} exceeds {MAX_LEVEL}"));
                }
                if let Some(level) = (0..=k).find(|&l| schedule.repetitions(k, l) == 0) {
                    return bad(format!("schedule gives zero repetitions at level {level}"));
                }
            }
            SchemeSpec::Hybrid { k, .. } => {
                if k > MAX_LEVEL {
                    return bad(format!("K = {k} exceeds {MAX_LEVEL}"));
                }
            }
            SchemeSpec::AdaptiveSize {
                budget,
                warmup,
                objective,
            } => {
                if warmup > budget {
                    return bad(format!("warmup {warmup} exceeds budget {budget}"));
                }
                if let SizeObjective::EntropyC { c } = objective {
                    if !c.is_finite() {
                        return bad("entropy offset must be finite".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Top level `K`, when the scheme has one.
    pub fn top_level(&self) -> Option<u32> {
        match *self {
            SchemeSpec::GeneralizedQpea { k, .. }
            | SchemeSpec::FixedK { k, .. }
            | SchemeSpec::Nonadaptive { k, .. }
            | SchemeSpec::Hybrid { k, .. } => Some(k),
            SchemeSpec::AdaptiveSize { .. } => None,
        }
    }

    /// Repetition count `M`, when the scheme has a single one.
    pub fn repetitions(&self) -> Option<usize> {
        match *self {
            SchemeSpec::GeneralizedQpea { m, .. } | SchemeSpec::FixedK { m, .. } | SchemeSpec::Hybrid { m, .. } => Some(m),
            SchemeSpec::Nonadaptive {
                schedule: Schedule::Constant { m },
                ..
            } => Some(m),
            _ => None,
        }
    }

    /// `(ν, count)` per level for the fixed part of the sequence, top level first.
    pub(crate) fn levels(&self) -> Vec<(u32, usize)> {
        match *self {
            SchemeSpec::GeneralizedQpea { k, m } | SchemeSpec::FixedK { k, m } => (0..=k).rev().map(|l| (l, m)).collect(),
            SchemeSpec::Nonadaptive { k, schedule, .. } => (0..=k).rev().map(|l| (l, schedule.repetitions(k, l))).collect(),
            SchemeSpec::Hybrid { k, .. } => (0..=k).rev().map(|l| (l, 1)).collect(),
            SchemeSpec::AdaptiveSize { .. } => Vec::new(),
        }
    }

    /// Total resources `N = Σν` of a complete run.
    pub fn nominal_resources(&self) -> u64 {
        match *self {
            SchemeSpec::AdaptiveSize { budget, .. } => budget,
            SchemeSpec::Hybrid { m, .. } => self.level_resources() + m as u64,
            _ => self.level_resources(),
        }
    }

    fn level_resources(&self) -> u64 {
        self.levels().iter().map(|&(l, c)| (c as u64) << l).sum()
    }

    /// Number of detections, when it does not depend on outcomes.
    pub fn detections(&self) -> Option<usize> {
        match *self {
            SchemeSpec::AdaptiveSize { .. } => None,
            SchemeSpec::Hybrid { m, .. } => Some(self.levels().len() + m),
            _ => Some(self.levels().iter().map(|&(_, c)| c).sum()),
        }
    }

    /// True when the sequence of sizes is fixed in advance.
    pub fn is_fixed_sequence(&self) -> bool {
        self.detections().is_some()
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SchemeSpec::GeneralizedQpea { k, m } => write!(f, "qpea(K={k},M={m})"),
            SchemeSpec::FixedK { k, m } => write!(f, "fixed_k(K={k},M={m})"),
            SchemeSpec::Nonadaptive { k, schedule, grid } => {
                let g = match grid {
                    PhaseGrid::HalfPeriod => "",
                    PhaseGrid::FullPeriod => ",full",
                };
                match schedule {
                    Schedule::Linear { a, b } => write!(f, "nonadaptive(K={k},M={a}+{b}(K-k){g})"),
                    Schedule::Constant { m } => write!(f, "nonadaptive(K={k},M={m}{g})"),
                }
            }
            SchemeSpec::Hybrid { k, m, increment } => {
                let inc = match increment {
                    HybridIncrement::PiOverM => "pi/M",
                    HybridIncrement::PiOverTwo => "pi/2",
                };
                write!(f, "hybrid(K={k},M={m},{inc})")
            }
            SchemeSpec::AdaptiveSize {
                budget,
                objective,
                warmup,
            } => {
                let o = match objective {
                    SizeObjective::VhN2 => "vh_n2".to_string(),
                    SizeObjective::EntropyC { c } => format!("entropy_c({c:.6})"),
                    SizeObjective::EntropyEqualprob => "entropy_equalprob".to_string(),
                };
                write!(f, "adaptive_size(N={budget},{o},warmup={warmup})")
            }
        }
    }
}
