use serde::Serialize;

use crate::posterior::Outcome;
use crate::scalar::Real;

/// Estimate after a realized resource count (size-adaptive runs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint<T> {
    pub resources: u64,
    pub estimate: T,
    pub sharpness: T,
}

/// One simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord<T> {
    pub phi_true: T,
    /// Initial feedback phase `Φ₁`.
    pub phi1: T,
    /// `φ − Φ₁` in `[0, 2π)`.
    pub relative_phase: T,
    pub outcomes: Vec<Outcome>,
    /// NOON size of each detection.
    pub sizes: Vec<u64>,
    /// Physical feedback phase of each detection.
    pub feedback: Vec<T>,
    /// `Σν`.
    pub resources: u64,
    pub estimate: T,
    /// `|c_1| / c_0` of the final posterior.
    pub final_sharpness: T,
    /// Realized intermediate estimates; empty for fixed-sequence schemes.
    pub trace: Vec<TracePoint<T>>,
}

impl<T: Real> TrialRecord<T> {
    /// `estimate − φ` in `(−π, π]`.
    pub fn error(&self) -> T {
        let d = (self.estimate - self.phi_true).wrap_angle();
        if d > T::PI() {
            d - T::TAU()
        } else {
            d
        }
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "phi_true",
        "phi1",
        "relative_phase",
        "outcomes",
        "sizes",
        "resources",
        "estimate",
        "final_sharpness",
        "error",
    ];

    /// Fields matching [`Self::CSV_HEADER`]; outcomes as a bit string and
    /// sizes separated by `;`.
    pub fn csv_row(&self) -> Vec<String> {
        let bits: String = self.outcomes.iter().map(|u| if u.bit() == 1 { '1' } else { '0' }).collect();
        let sizes: Vec<String> = self.sizes.iter().map(u64::to_string).collect();
        vec![
            self.phi_true.to_string(),
            self.phi1.to_string(),
            self.relative_phase.to_string(),
            bits,
            sizes.join(";"),
            self.resources.to_string(),
            self.estimate.to_string(),
            self.final_sharpness.to_string(),
            self.error().to_string(),
        ]
    }
}
