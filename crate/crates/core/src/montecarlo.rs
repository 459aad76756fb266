//! Variance estimation: exhaustive enumeration of outcome trees for small
//! instances, seeded parallel Monte Carlo for large ones.
//!
//! Trial `i` of a run with seed `s` draws from `ChaCha8` keyed by `s` on
//! stream `i`, so the sample set never depends on scheduling. Trials are
//! grouped into contiguous batches whose partial sums are combined in batch
//! order; the batches double as jackknife groups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::schemes::{run_trial, NoonSampler, Run, RunOptions, SchemeSpec, TrialRecord};
use crate::variance::{float_or_inf, Variance};

/// Jackknife groups (and reduction batches) per Monte Carlo run.
pub const BATCHES: usize = 32;

/// Largest number of detections `enumerate_exact` will expand (`2^D` leaves).
pub const MAX_ENUMERATED_DETECTIONS: usize = 26;

/// Relative change of `V_H N²` beyond which a rerun counts as tail-sensitive.
pub const TAIL_SHIFT_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Enumerate,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub scheme: SchemeSpec,
    /// Nominal resources `N` (the budget for size-adaptive schemes).
    pub n: u64,
    /// Trials, or outcome branches for enumeration.
    pub samples: u64,
    pub seed: u64,
    /// Mean of per-trial posterior sharpness.
    pub mu_sharpness: f64,
    pub vh_sharpness: Variance<f64>,
    /// `|mean e^{i(φ̂ − φ)}|`.
    pub mu_empirical: f64,
    pub vh_empirical: Variance<f64>,
    /// Jackknife standard error of `vh_sharpness`.
    #[serde(with = "float_or_inf")]
    pub stderr_vh: f64,
    /// Jackknife standard error of `vh_empirical`.
    #[serde(with = "float_or_inf")]
    pub stderr_vh_empirical: f64,
    /// Number of reduction batches.
    pub partitions: u32,
    pub method: Method,
}

impl VarianceReport {
    /// `V_H N²` from the sharpness estimator.
    pub fn vh_times_n2(&self) -> Variance<f64> {
        let n = self.n as f64;
        self.vh_sharpness.scaled(n * n)
    }

    /// Distance between the two estimators in units of their combined error.
    pub fn estimator_discrepancy(&self) -> f64 {
        match (self.vh_sharpness, self.vh_empirical) {
            (Variance::Finite(a), Variance::Finite(b)) => {
                let s = self.stderr_vh.hypot(self.stderr_vh_empirical);
                if s > 0.0 {
                    (a - b).abs() / s
                } else if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (Variance::Infinite, Variance::Infinite) => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// Exact `V_H` by expanding every outcome branch of a fixed-sequence scheme
/// with `Φ₁ = 0`. Both estimators coincide here: `μ = Σ_branches |c_1|`.
pub fn enumerate_exact<T: Real>(spec: &SchemeSpec) -> Result<VarianceReport> {
    spec.validate()?;
    let detections = spec.detections().ok_or(Error::NotEnumerable)?;
    if detections > MAX_ENUMERATED_DETECTIONS {
        return Err(Error::TooManyBranches {
            detections,
            limit: MAX_ENUMERATED_DETECTIONS,
        });
    }
    let options = RunOptions {
        absolute_weights: true,
        ..RunOptions::default()
    };
    let run = Run::<T>::new(spec, T::zero(), T::zero(), options)?;
    let mut acc = (0.0f64, 0.0f64, 0u64);
    expand(run, &mut acc)?;
    let (total, mu, leaves) = acc;
    let tol = 1e-12f64.max(T::epsilon().to_f64().unwrap() * 4.0 * detections.max(1) as f64);
    if (total - 1.0).abs() > tol {
        return Err(Error::ProbabilityLeak(total));
    }
    let vh = Variance::from_sharpness(mu);
    Ok(VarianceReport {
        scheme: spec.clone(),
        n: spec.nominal_resources(),
        samples: leaves,
        seed: 0,
        mu_sharpness: mu,
        vh_sharpness: vh,
        mu_empirical: mu,
        vh_empirical: vh,
        stderr_vh: 0.0,
        stderr_vh_empirical: 0.0,
        partitions: 1,
        method: Method::Enumerate,
    })
}

fn expand<T: Real>(mut run: Run<T>, acc: &mut (f64, f64, u64)) -> Result<()> {
    match run.next_measurement()? {
        None => {
            let l = run.final_likelihood()?;
            acc.0 += l.branch_weight().to_f64().unwrap();
            acc.1 += l.mu_weight().to_f64().unwrap();
            acc.2 += 1;
            Ok(())
        }
        Some(_) => {
            let mut other = run.clone();
            run.record(crate::Outcome::Zero)?;
            other.record(crate::Outcome::One)?;
            expand(run, acc)?;
            expand(other, acc)
        }
    }
}

/// Random generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Trial `index`: `φ` and `Φ₁` uniform on `[0, 2π)`, outcomes sampled.
pub fn simulate_trial<T: Real>(spec: &SchemeSpec, seed: u64, index: u64, options: RunOptions) -> Result<TrialRecord<T>> {
    let mut rng = trial_rng(seed, index);
    let tau = std::f64::consts::TAU;
    let phi_true = T::from_f64(rng.random::<f64>() * tau).unwrap().wrap_angle();
    let phi1 = T::from_f64(rng.random::<f64>() * tau).unwrap().wrap_angle();
    let mut source = NoonSampler::new(phi_true, &mut rng);
    run_trial(spec, phi_true, phi1, &mut source, options)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    sharpness: f64,
    cos: f64,
    sin: f64,
    count: u64,
}

impl Sums {
    fn add(&mut self, sharpness: f64, error: f64) {
        self.sharpness += sharpness;
        self.cos += error.cos();
        self.sin += error.sin();
        self.count += 1;
    }

    fn merge(&mut self, o: &Sums) {
        self.sharpness += o.sharpness;
        self.cos += o.cos;
        self.sin += o.sin;
        self.count += o.count;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            sharpness: self.sharpness - o.sharpness,
            cos: self.cos - o.cos,
            sin: self.sin - o.sin,
            count: self.count - o.count,
        }
    }

    fn mu_sharpness(&self) -> f64 {
        self.sharpness / self.count as f64
    }

    fn mu_empirical(&self) -> f64 {
        self.cos.hypot(self.sin) / self.count as f64
    }
}

fn batch_ranges(samples: u64) -> Vec<std::ops::Range<u64>> {
    let parts = (BATCHES as u64).min(samples).max(1);
    (0..parts)
        .map(|b| (b * samples / parts)..((b + 1) * samples / parts))
        .collect()
}

/// Delete-one-group jackknife standard error of `V_H(μ)`.
fn jackknife(total: &Sums, batches: &[Sums], mu: impl Fn(&Sums) -> f64) -> f64 {
    let g = batches.len();
    if g < 2 {
        return f64::INFINITY;
    }
    let mut values = Vec::with_capacity(g);
    for b in batches {
        match Variance::from_sharpness(mu(&total.minus(b))) {
            Variance::Finite(v) => values.push(v),
            Variance::Infinite => return f64::INFINITY,
        }
    }
    let mean = values.iter().sum::<f64>() / g as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    ((g as f64 - 1.0) / g as f64 * ss).sqrt()
}

/// Monte Carlo estimate of both variance estimators over `samples` trials.
pub fn estimate_montecarlo<T: Real>(spec: &SchemeSpec, samples: u64, seed: u64) -> Result<VarianceReport> {
    if samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples as usize });
    }
    spec.validate()?;
    let ranges = batch_ranges(samples);
    let batches: Vec<Sums> = ranges
        .into_par_iter()
        .map(|range| {
            let mut s = Sums::default();
            for i in range {
                let r = simulate_trial::<T>(spec, seed, i, RunOptions::default())?;
                s.add(r.final_sharpness.to_f64().unwrap(), r.error().to_f64().unwrap());
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total = Sums::default();
    for b in &batches {
        total.merge(b);
    }
    let mu_sharpness = total.mu_sharpness();
    let mu_empirical = total.mu_empirical();
    Ok(VarianceReport {
        scheme: spec.clone(),
        n: spec.nominal_resources(),
        samples,
        seed,
        mu_sharpness,
        vh_sharpness: Variance::from_sharpness(mu_sharpness),
        mu_empirical,
        vh_empirical: Variance::from_sharpness(mu_empirical),
        stderr_vh: jackknife(&total, &batches, Sums::mu_sharpness),
        stderr_vh_empirical: jackknife(&total, &batches, Sums::mu_empirical),
        partitions: batches.len() as u32,
        method: Method::Montecarlo,
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for entry `index` of a sweep seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Monte Carlo estimates for each spec with independent derived seeds. A
/// failing spec yields an error entry without affecting the others.
pub fn sweep<T: Real>(specs: &[SchemeSpec], samples: u64, seed: u64) -> Result<Vec<Result<VarianceReport>>> {
    if specs.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, spec)| estimate_montecarlo::<T>(spec, samples, derive_seed(seed, i as u64)))
        .collect())
}

/// Comparison of a report against a larger rerun of the same scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    /// `|V₂ − V₁| / V₁` for the sharpness estimator.
    pub relative_shift: f64,
    pub flagged: bool,
}

pub fn tail_sensitivity(base: &VarianceReport, rerun: &VarianceReport) -> TailCheck {
    let relative_shift = match (base.vh_sharpness, rerun.vh_sharpness) {
        (Variance::Finite(a), Variance::Finite(b)) if a > 0.0 => (b - a).abs() / a,
        (Variance::Infinite, Variance::Infinite) => 0.0,
        _ => f64::INFINITY,
    };
    TailCheck {
        relative_shift,
        flagged: relative_shift > TAIL_SHIFT_THRESHOLD,
    }
}

/// Estimators at one resource count of a size-adaptive run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub mu_sharpness: f64,
    pub vh_sharpness: Variance<f64>,
    pub mu_empirical: f64,
    pub vh_empirical: Variance<f64>,
}

/// Variance at every intermediate resource count `1..=budget` of a
/// size-adaptive scheme. Counts skipped by a trial take the estimate and
/// sharpness of the last count it realized.
pub fn resource_curve<T: Real>(spec: &SchemeSpec, samples: u64, seed: u64) -> Result<Vec<CurvePoint>> {
    let SchemeSpec::AdaptiveSize { budget, .. } = *spec else {
        return Err(Error::InvalidScheme("resource curves need a size-adaptive scheme".into()));
    };
    if samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples as usize });
    }
    spec.validate()?;
    let len = budget as usize;
    let options = RunOptions {
        record_trace: true,
        ..RunOptions::default()
    };
    let batches: Vec<Vec<Sums>> = batch_ranges(samples)
        .into_par_iter()
        .map(|range| {
            let mut sums = vec![Sums::default(); len];
            for i in range {
                let r = simulate_trial::<T>(spec, seed, i, options)?;
                let phi = r.phi_true.to_f64().unwrap();
                let mut carry = (0.0f64, r.phi1.to_f64().unwrap() - phi);
                let mut points = r.trace.iter().peekable();
                for (idx, s) in sums.iter_mut().enumerate() {
                    let n = idx as u64 + 1;
                    while let Some(p) = points.next_if(|p| p.resources <= n) {
                        carry = (p.sharpness.to_f64().unwrap(), p.estimate.to_f64().unwrap() - phi);
                    }
                    s.add(carry.0, carry.1);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Sums::default(); len];
    for b in &batches {
        for (t, s) in total.iter_mut().zip(b) {
            t.merge(s);
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let (ms, me) = (s.mu_sharpness(), s.mu_empirical());
            CurvePoint {
                n: idx as u64 + 1,
                mu_sharpness: ms,
                vh_sharpness: Variance::from_sharpness(ms),
                mu_empirical: me,
                vh_empirical: Variance::from_sharpness(me),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_samples() {
        for s in [2u64, 31, 32, 33, 1000] {
            let r = batch_ranges(s);
            assert_eq!(r.first().unwrap().start, 0);
            assert_eq!(r.last().unwrap().end, s);
            assert!(r.windows(2).all(|w| w[0].end == w[1].start));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
