//! Equivalent two-mode states of NOON measurement sequences.
//!
//! A product of NOON states across time modes has the same canonical phase
//! statistics as the single two-mode state `Σ ψ_n |n, N−n⟩` with
//! `ψ_n ∝ √f(n)`, where `f(n)` counts the ways `n` photons can be split
//! among the time modes. Counts are exact big integers; amplitudes are
//! normalized only at the end.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::variance::Variance;

/// Exact multiplicities `f(0)..f(N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    counts: Vec<BigUint>,
}

impl CountTable {
    /// Table from explicit counts.
    pub fn from_counts(counts: Vec<BigUint>) -> Result<Self> {
        if counts.is_empty() || counts.iter().all(Zero::is_zero) {
            return Err(Error::InvalidState("count table has no mass".into()));
        }
        Ok(Self { counts })
    }

    /// `f_1`: `N_K + 1` ones.
    pub fn uniform(n_k: usize) -> Self {
        Self {
            counts: vec![BigUint::one(); n_k + 1],
        }
    }

    /// `f_M` for `M` copies of the uniform superposition of `0..=N_K` photons.
    pub fn copies(n_k: usize, m: usize) -> Result<Self> {
        if n_k < 1 || m < 1 {
            return Err(Error::InvalidState(format!("copies need N_K ≥ 1 and M ≥ 1, got ({n_k}, {m})")));
        }
        let mut t = Self::uniform(n_k);
        for _ in 1..m {
            t = t.convolve_uniform(n_k);
        }
        Ok(t)
    }

    /// Binomial coefficients `C(m, 0..=m)`.
    pub fn binomial(m: usize) -> Self {
        let mut counts = Vec::with_capacity(m + 1);
        let mut c = BigUint::one();
        counts.push(c.clone());
        for k in 0..m {
            c = c * BigUint::from(m - k) / BigUint::from(k + 1);
            counts.push(c.clone());
        }
        Self { counts }
    }

    /// `f(n) = Σ_{k=0..N_K} C(M, n−k)`: a QPEA register followed by `M` single passes.
    pub fn hybrid(n_k: usize, m: usize) -> Result<Self> {
        if n_k < 1 {
            return Err(Error::InvalidState(format!("hybrid needs N_K ≥ 1, got {n_k}")));
        }
        Ok(Self::binomial(m).convolve_uniform(n_k))
    }

    /// Convolution with a window of `N_K + 1` ones, via running sums.
    pub fn convolve_uniform(&self, n_k: usize) -> Self {
        let len = self.counts.len() + n_k;
        let mut out = Vec::with_capacity(len);
        let mut running = BigUint::zero();
        for n in 0..len {
            if let Some(f) = self.counts.get(n) {
                running += f;
            }
            if n > n_k {
                if let Some(f) = self.counts.get(n - n_k - 1) {
                    running -= f;
                }
            }
            out.push(running.clone());
        }
        Self { counts: out }
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// Total photon number `N`.
    pub fn photon_number(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.counts.iter().eq(self.counts.iter().rev())
    }

    /// Non-decreasing then non-increasing.
    pub fn is_unimodal(&self) -> bool {
        let mut falling = false;
        for w in self.counts.windows(2) {
            if w[1] < w[0] {
                falling = true;
            } else if w[1] > w[0] && falling {
                return false;
            }
        }
        true
    }

    /// Largest `|f(n+1) − f(n)|`.
    pub fn max_increment(&self) -> BigUint {
        self.counts
            .windows(2)
            .map(|w| if w[1] >= w[0] { &w[1] - &w[0] } else { &w[0] - &w[1] })
            .max()
            .unwrap_or_default()
    }

    /// Exact moments of the normalized count distribution.
    pub fn number_moments(&self) -> ExactMoments {
        let total = BigInt::from(self.total());
        let mut s1 = BigInt::zero();
        let mut s2 = BigInt::zero();
        for (n, f) in self.counts.iter().enumerate() {
            let f = BigInt::from(f.clone());
            let n = BigInt::from(n);
            s1 += &f * &n;
            s2 += f * &n * &n;
        }
        let mean = BigRational::new(s1, total.clone());
        let second_moment = BigRational::new(s2, total);
        let variance = &second_moment - &mean * &mean;
        ExactMoments {
            mean,
            second_moment,
            variance,
        }
    }

    /// Amplitudes `ψ_n = √(f(n) / Σf)`.
    pub fn to_state<T: Real>(&self) -> TwoModeState<T> {
        let total = self.total();
        let amps = self
            .counts
            .iter()
            .map(|f| T::from_f64(ratio_f64(f, &total).sqrt()).expect("amplitude representable"))
            .collect();
        TwoModeState { amps }
    }
}

/// `num / den` as `f64` without overflowing intermediate conversions.
fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let (nb, db) = (num.bits() as i64, den.bits() as i64);
    let top = |x: &BigUint, bits: i64| -> (f64, i64) {
        let shift = (bits - 64).max(0);
        ((x >> shift as u64).to_f64().expect("64 bits fit in f64"), shift)
    };
    let (nm, ns) = top(num, nb);
    let (dm, ds) = top(den, db);
    let exp = (ns - ds).clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    nm / dm * 2f64.powi(exp)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMoments {
    pub mean: BigRational,
    pub second_moment: BigRational,
    pub variance: BigRational,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub mean: T,
    pub second_moment: T,
    pub variance: T,
}

/// `Σ ψ_n |n, N−n⟩` with real nonnegative amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState<T> {
    amps: Vec<T>,
}

impl<T: Real> TwoModeState<T> {
    /// Validates nonnegativity and normalization.
    pub fn new(amps: Vec<T>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("no amplitudes".into()));
        }
        if amps.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidState("amplitudes must be finite and nonnegative".into()));
        }
        let norm: T = amps.iter().map(|a| *a * *a).sum();
        let len = T::from_usize(amps.len()).unwrap();
        let tol = T::c(1e-12).max(T::epsilon() * len.sqrt() * T::c(16.0));
        if (norm - T::one()).abs() > tol {
            return Err(Error::InvalidState(format!("Σψ² = {norm}, not 1")));
        }
        Ok(Self { amps })
    }

    /// Uniform superposition over `0..=n` photons.
    pub fn uniform(n: usize) -> Self {
        CountTable::uniform(n).to_state()
    }

    /// `M` copies of an `N_K`-photon uniform superposition.
    pub fn copies(n_k: usize, m: usize) -> Result<Self> {
        Ok(CountTable::copies(n_k, m)?.to_state())
    }

    /// QPEA register of size `N_K` combined with `M` single passes.
    pub fn hybrid(n_k: usize, m: usize) -> Result<Self> {
        Ok(CountTable::hybrid(n_k, m)?.to_state())
    }

    pub fn amps(&self) -> &[T] {
        &self.amps
    }

    pub fn photon_number(&self) -> usize {
        self.amps.len() - 1
    }

    /// `μ = Σ ψ_n ψ_{n+1}`.
    pub fn canonical_mu(&self) -> T {
        self.amps.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// `V_C = Σ (ψ_n − ψ_{n+1})²` with zero amplitudes outside `0..=N`;
    /// equal to `2(1 − μ)` but free of cancellation.
    pub fn collett_variance(&self) -> T {
        let first = self.amps[0];
        let last = self.amps[self.amps.len() - 1];
        let inner: T = self.amps.windows(2).map(|w| (w[0] - w[1]) * (w[0] - w[1])).sum();
        first * first + last * last + inner
    }

    /// `V_H = μ^{-2} − 1`.
    pub fn holevo_variance(&self) -> Variance<T> {
        let mu = self.canonical_mu();
        Variance::from_sharpness_deficit(mu, self.collett_variance() * T::c(0.5))
    }

    pub fn number_moments(&self) -> Moments<T> {
        let mut mean = T::zero();
        let mut second_moment = T::zero();
        for (n, a) in self.amps.iter().enumerate() {
            let n = T::from_usize(n).unwrap();
            let p = *a * *a;
            mean = mean + n * p;
            second_moment = second_moment + n * n * p;
        }
        Moments {
            mean,
            second_moment,
            variance: second_moment - mean * mean,
        }
    }
}

/// Heisenberg-limited phase standard deviation, `tan(π/(N+2))`.
pub fn heisenberg_limit_stddev<T: Real>(n: u64) -> T {
    (T::PI() / T::from_u64(n + 2).unwrap()).tan()
}

/// Standard quantum limit for the variance, `1/N`.
pub fn standard_quantum_limit<T: Real>(n: u64) -> T {
    T::one() / T::from_u64(n).unwrap()
}

/// Lower bound on `V_H` from repeating an `N_K` register `M` times:
/// `3/(M N_K (N_K+2))`.
pub fn repetition_bound<T: Real>(n_k: u64, m: u64) -> T {
    T::c(3.0) / T::from_u64(m * n_k * (n_k + 2)).unwrap()
}

/// `κ = 2√(1/3) / (√(1 − 2e^{-2}) − e^{-1})² ≈ 4.886`.
pub fn kappa<T: Real>() -> T {
    let e2 = (-T::c(2.0)).exp();
    let e1 = (-T::one()).exp();
    let gap = (T::one() - T::c(2.0) * e2).sqrt() - e1;
    T::c(2.0) * (T::one() / T::c(3.0)).sqrt() / (gap * gap)
}

/// Lower bound on `V_H` for a QPEA register of size `N_K` plus `M` single passes:
/// `1/(κ (N_K+1) √M)`.
pub fn hybrid_bound<T: Real>(n_k: u64, m: u64) -> T {
    let m = T::from_u64(m).unwrap();
    T::one() / (kappa::<T>() * T::from_u64(n_k + 1).unwrap() * m.sqrt())
}

/// Upper bound on the canonical `V_C` of `M` copies: `M!/(N_K+1)²`.
pub fn copies_collett_bound<T: Real>(n_k: u64, m: u64) -> T {
    let fact: T = (1..=m).map(|i| T::from_u64(i).unwrap()).fold(T::one(), |a, b| a * b);
    fact / T::from_u64((n_k + 1) * (n_k + 1)).unwrap()
}

/// Richardson estimate of `c` in `V_C = 2 ln N/N² + c/N² + O(N^{-3})` for two copies.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCopyConstant {
    /// `(N_K, N² V_C − 2 ln N)` on the ladder.
    pub raw: Vec<(usize, f64)>,
    /// One Richardson level (removes the `1/N` term).
    pub first_order: f64,
    /// Two levels (also removes `1/N²`).
    pub second_order: f64,
}

/// Evaluates the two-copy constant on `N_K = 2^lo ..= 2^hi` (at least three rungs).
pub fn two_copy_constant(lo: u32, hi: u32) -> Result<TwoCopyConstant> {
    if hi < lo + 2 {
        return Err(Error::InvalidState("need at least three ladder rungs".into()));
    }
    let raw: Vec<(usize, f64)> = (lo..=hi)
        .map(|e| {
            let n_k = 1usize << e;
            let s = TwoModeState::<f64>::copies(n_k, 2).expect("valid parameters");
            let n = (2 * n_k) as f64;
            (n_k, n * n * s.collett_variance() - 2.0 * n.ln())
        })
        .collect();
    let r1: Vec<f64> = raw.windows(2).map(|w| 2.0 * w[1].1 - w[0].1).collect();
    let r2: Vec<f64> = r1.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
    Ok(TwoCopyConstant {
        first_order: *r1.last().unwrap(),
        second_order: *r2.last().unwrap(),
        raw,
    })
}
