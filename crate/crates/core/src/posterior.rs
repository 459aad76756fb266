//! Fourier-coefficient representation of the phase likelihood.
//!
//! A likelihood at level `k` is stored as the non-negative harmonics of
//!
//! ```text
//! L(φ) = Σ_{j=-J..J} c_j e^{i j 2^k φ},    c_{-j} = conj(c_j)
//! ```
//!
//! with `c_0` equal to the probability of the outcome record under a flat
//! prior. NOON detections multiply `L` by `½[1 ± cos(ν(φ − Φ))]`, which mixes
//! each harmonic with its neighbours `ν / 2^k` steps away.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A single detection result (the parity bit of a NOON measurement).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Zero, Outcome::One];

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Outcome::One
        } else {
            Outcome::Zero
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Outcome::Zero => 0,
            Outcome::One => 1,
        }
    }

    /// `(-1)^u`.
    pub fn sign<T: Real>(self) -> T {
        match self {
            Outcome::Zero => T::one(),
            Outcome::One => -T::one(),
        }
    }
}

/// Controllable phase in the reference arm, reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct FeedbackPhase<T>(T);

impl<T: Real> FeedbackPhase<T> {
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinitePhase);
        }
        Ok(Self(value.wrap_angle()))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn value(self) -> T {
        self.0
    }

    /// Adds `delta` and re-reduces.
    pub fn shifted(self, delta: T) -> Self {
        Self((self.0 + delta).wrap_angle())
    }
}

/// A feedback phase together with whether the likelihood carried enough
/// information to determine it. Uninformative results hold phase 0 and
/// callers substitute their own default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback<T> {
    pub phase: FeedbackPhase<T>,
    pub informative: bool,
}

impl<T: Real> Feedback<T> {
    fn informative(value: T) -> Self {
        Self {
            phase: FeedbackPhase(value.wrap_angle()),
            informative: true,
        }
    }

    fn uninformative() -> Self {
        Self {
            phase: FeedbackPhase::zero(),
            informative: false,
        }
    }

    /// The phase if informative, otherwise `default`.
    pub fn or(self, default: FeedbackPhase<T>) -> FeedbackPhase<T> {
        if self.informative {
            self.phase
        } else {
            default
        }
    }
}

/// Probability of parity `u` for a `nu`-photon NOON state:
/// `½[1 + (-1)^u cos(ν(φ − Φ))]`.
pub fn noon_outcome_prob<T: Real>(u: Outcome, phi: T, nu: u64, feedback: FeedbackPhase<T>) -> T {
    let nu = T::from_u64(nu).expect("NOON size representable");
    let half = T::c(0.5);
    half * (T::one() + u.sign::<T>() * (nu * (phi - feedback.value())).cos())
}

/// Predicted effect of one detection on a likelihood, per outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPreview<T> {
    /// `c'_0`: unnormalized probability of the branch.
    pub weight: T,
    /// `|c'_target|` after the update.
    pub target_modulus: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLikelihood<T> {
    level: u32,
    /// `c_0..c_{len-1}`; harmonics past the end are zero.
    coeffs: Vec<Complex<T>>,
    max_order: usize,
}

impl<T: Real> PhaseLikelihood<T> {
    /// Flat likelihood (no detections yet).
    pub fn flat(max_order: usize, level: u32) -> Result<Self> {
        if max_order < 1 {
            return Err(Error::InvalidOrder(max_order));
        }
        Ok(Self {
            level,
            coeffs: vec![Complex::new(T::one(), T::zero())],
            max_order,
        })
    }

    /// Builds a likelihood from explicit harmonics `c_0..`. `c_0` must be real
    /// and positive; harmonics beyond `max_order` are dropped.
    pub fn from_coeffs(level: u32, mut coeffs: Vec<Complex<T>>, max_order: usize) -> Result<Self> {
        if max_order < 1 {
            return Err(Error::InvalidOrder(max_order));
        }
        let Some(c0) = coeffs.first().copied() else {
            return Err(Error::InvalidState("no coefficients".into()));
        };
        if !(c0.re > T::zero()) || c0.im.abs() > c0.re * T::tiny() {
            return Err(Error::InvalidState("c_0 must be real and positive".into()));
        }
        coeffs[0] = Complex::new(c0.re, T::zero());
        coeffs.truncate(max_order + 1);
        Ok(Self {
            level,
            coeffs,
            max_order,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Stored harmonics `c_0..`; trailing harmonics not listed are zero.
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Harmonic `j`, resolving negative indices by conjugation.
    pub fn coeff(&self, j: i64) -> Complex<T> {
        let idx = j.unsigned_abs() as usize;
        let c = self.coeffs.get(idx).copied().unwrap_or_else(Complex::default);
        if j < 0 {
            c.conj()
        } else {
            c
        }
    }

    fn get(&self, idx: usize) -> Complex<T> {
        self.coeffs.get(idx).copied().unwrap_or_else(Complex::default)
    }

    /// Number of level-`k` harmonic steps a size-`nu` detection moves.
    pub fn harmonic_shift(&self, nu: u64) -> Result<usize> {
        let unit = 1u64.checked_shl(self.level).unwrap_or(0);
        if nu == 0 || unit == 0 || nu % unit != 0 {
            return Err(Error::SizeNotAtLevel {
                nu,
                level: self.level,
            });
        }
        let shift = (nu / unit) as usize;
        if shift > self.max_order {
            return Err(Error::ShiftExceedsOrder {
                shift,
                max_order: self.max_order,
            });
        }
        Ok(shift)
    }

    /// Bayesian update for parity `u` from a `nu`-photon NOON state with
    /// feedback phase `feedback`.
    pub fn update(&self, u: Outcome, feedback: FeedbackPhase<T>, nu: u64) -> Result<Self> {
        let shift = self.harmonic_shift(nu)?;
        Ok(self.update_with_shift(u, physical_angle(feedback, nu), shift))
    }

    /// Both children of a detection: `[u = 0, u = 1]`.
    pub fn children(&self, feedback: FeedbackPhase<T>, nu: u64) -> Result<[Self; 2]> {
        let shift = self.harmonic_shift(nu)?;
        let theta = physical_angle(feedback, nu);
        Ok(Outcome::BOTH.map(|u| self.update_with_shift(u, theta, shift)))
    }

    fn update_with_shift(&self, u: Outcome, theta: T, shift: usize) -> Self {
        let n = self.coeffs.len();
        let out_len = (n + shift).min(self.max_order + 1);
        let quarter = T::c(0.25) * u.sign::<T>();
        let half = T::c(0.5);
        let rot = Complex::new(theta.cos(), theta.sin());
        let down = rot.conj() * quarter; // multiplies c_{j-s}
        let up = rot * quarter; // multiplies c_{j+s}

        let mut out = Vec::with_capacity(out_len);
        // c'_0 = ½ c_0 ± ½ Re(c_s e^{iθ}), kept exactly real.
        let c0 = self.coeffs[0].re * half + (self.get(shift) * up).re * T::c(2.0);
        out.push(Complex::new(c0, T::zero()));
        for j in 1..out_len {
            let lower = if j >= shift {
                self.get(j - shift)
            } else {
                self.get(shift - j).conj()
            };
            out.push(self.get(j) * half + lower * down + self.get(j + shift) * up);
        }
        Self {
            level: self.level,
            coeffs: out,
            max_order: self.max_order,
        }
    }

    /// Multiplies by a power of two so `c_0` is near one once it has fallen
    /// below `√min_positive`. Exact in binary floating point; branch weights
    /// stop being absolute probabilities afterwards.
    pub fn renormalized(mut self) -> Self {
        let c0 = self.coeffs[0].re;
        if !(c0 > T::zero()) || c0 >= T::min_positive_value().sqrt() {
            return self;
        }
        let e = c0.log2().floor().to_i32().unwrap_or(0);
        let s = T::c(2.0).powi(-e);
        for c in &mut self.coeffs {
            *c = *c * s;
        }
        self
    }

    /// Re-expresses the likelihood at level `k - 1`: `c'_{2j} = c_j`, odd
    /// harmonics zero.
    pub fn rescale(&self) -> Result<Self> {
        if self.level == 0 {
            return Err(Error::AlreadyBaseLevel);
        }
        let out_len = (2 * self.coeffs.len() - 1).min(self.max_order + 1);
        let mut out = vec![Complex::default(); out_len];
        for (j, c) in self.coeffs.iter().enumerate() {
            if 2 * j >= out_len {
                break;
            }
            out[2 * j] = *c;
        }
        Ok(Self {
            level: self.level - 1,
            coeffs: out,
            max_order: self.max_order,
        })
    }

    /// Same likelihood with a different truncation order.
    pub fn with_max_order(&self, max_order: usize) -> Result<Self> {
        self.clone().truncated(max_order)
    }

    /// Consuming form of [`Self::with_max_order`].
    pub fn truncated(mut self, max_order: usize) -> Result<Self> {
        if max_order < 1 {
            return Err(Error::InvalidOrder(max_order));
        }
        self.coeffs.truncate(max_order + 1);
        self.max_order = max_order;
        Ok(self)
    }

    /// Complex conjugate of every harmonic, i.e. `L(-φ)`.
    pub fn conjugated(&self) -> Self {
        Self {
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
            max_order: self.max_order,
        }
    }

    /// Evaluates `L(φ)` from all stored harmonics, negative ones included.
    /// The imaginary part is rounding noise.
    pub fn evaluate(&self, phi: T) -> Complex<T> {
        let unit = T::from_u64(1u64 << self.level).expect("level representable");
        let mut acc = Complex::default();
        for (j, c) in self.coeffs.iter().enumerate() {
            let arg = unit * T::from_usize(j).expect("index representable") * phi;
            let e = Complex::new(arg.cos(), arg.sin());
            acc = acc + *c * e;
            if j > 0 {
                acc = acc + c.conj() * e.conj();
            }
        }
        acc
    }

    /// `c_0`: probability of this outcome branch under the flat prior.
    pub fn branch_weight(&self) -> T {
        self.coeffs[0].re
    }

    /// `|c_1|`: this branch's contribution to the overall sharpness.
    pub fn mu_weight(&self) -> T {
        self.get(1).norm()
    }

    /// `|c_1| / c_0`: sharpness of the normalized posterior in `e^{i 2^k φ}`.
    pub fn sharpness(&self) -> Result<T> {
        let c0 = self.branch_weight();
        if !(c0 > T::zero()) {
            return Err(Error::ImpossibleBranch);
        }
        Ok(self.mu_weight() / c0)
    }

    /// `arg⟨e^{iφ}⟩ = -arg c_1`, in `[0, 2π)`.
    pub fn phase_estimate(&self) -> Result<T> {
        if self.level != 0 {
            return Err(Error::NotBaseLevel(self.level));
        }
        let c1 = self.get(1);
        if c1.norm() <= self.branch_weight().abs() * T::tiny() {
            return Err(Error::AmbiguousEstimate);
        }
        Ok((-c1.arg()).wrap_angle())
    }

    /// Feedback for the first detection at the next lower level:
    /// `Φ = -2^{-ℓ} arg c_1`, `ℓ` this likelihood's level, with `arg` taken in
    /// `(-2π, 0]` so that `Φ ≥ 0`.
    pub fn optimal_feedback(&self) -> Feedback<T> {
        let c1 = self.get(1);
        if c1.norm() <= self.branch_weight() * T::tiny() {
            return Feedback::uninformative();
        }
        let mut arg = c1.arg();
        if arg > T::zero() {
            arg = arg - T::TAU();
        }
        let scale = T::from_u64(1u64 << self.level).expect("level representable");
        Feedback::informative(-arg / scale)
    }

    /// Weights and `|c'_target|` of both children of a size-`nu` detection.
    pub fn predict(&self, feedback: FeedbackPhase<T>, nu: u64, target: usize) -> Result<[BranchPreview<T>; 2]> {
        let shift = self.harmonic_shift(nu)?;
        let theta = physical_angle(feedback, nu);
        let terms = PreviewTerms::new(self, shift, target);
        let (wp, wm, tp, tm) = terms.at(theta);
        Ok([
            BranchPreview {
                weight: wp,
                target_modulus: tp,
            },
            BranchPreview {
                weight: wm,
                target_modulus: tm,
            },
        ])
    }

    /// Feedback phase maximizing `Σ_u |c'_target(u, Φ)|` for a size-`nu`
    /// detection. Exact 1-D maximization: a dense scan over one period
    /// followed by bisection on the analytic derivative.
    pub fn maximize_expected_sharpness(&self, nu: u64, target: usize) -> Result<Feedback<T>> {
        let shift = self.harmonic_shift(nu)?;
        let terms = PreviewTerms::new(self, shift, target);
        Ok(match terms.maximize() {
            Some(theta) => {
                let nu = T::from_u64(nu).expect("NOON size representable");
                Feedback::informative(theta / nu)
            }
            None => Feedback::uninformative(),
        })
    }

    /// Feedback phase making both outcomes of a size-`nu` detection equally
    /// likely: `Re(c_s e^{iνΦ}) = 0`, chosen as `Φ = (π/2 − arg c_s)/ν ∈ [0, 2π/ν)`.
    pub fn equal_probability_feedback(&self, nu: u64) -> Result<Feedback<T>> {
        let shift = self.harmonic_shift(nu)?;
        let cs = self.get(shift);
        if cs.norm() <= self.branch_weight() * T::tiny() {
            return Ok(Feedback::uninformative());
        }
        let theta = (T::FRAC_PI_2() - cs.arg()).wrap_angle();
        let nu = T::from_u64(nu).expect("NOON size representable");
        Ok(Feedback::informative(theta / nu))
    }
}

fn physical_angle<T: Real>(feedback: FeedbackPhase<T>, nu: u64) -> T {
    // `nu * Φ` reduced exactly enough: Φ < 2π and nu ≤ 2^53 in practice.
    (T::from_u64(nu).expect("NOON size representable") * feedback.value()).wrap_angle()
}

/// The harmonics a single update needs for `c'_0` and `c'_target`.
///
/// With `A = ½c_t` and `B(θ) = lo e^{-iθ} + hi e^{iθ}` the two children have
/// `c'_t = A ± B`, and the expected-sharpness objective satisfies
///
/// ```text
/// (|A+B| + |A−B|)² = 2 F(ψ),  F(ψ) = a + Re(w e^{iψ}) + |q − α e^{-iψ} − β e^{iψ}|,  ψ = 2θ
/// ```
///
/// with `a = |A|² + |lo|² + |hi|²`, `w = 2 conj(lo) hi`, `q = A² − 2 lo hi`,
/// `α = lo²`, `β = hi²`.
struct PreviewTerms<T> {
    half_c0: T,
    /// `c_s` (for the weight `½c_0 ± ½Re(c_s e^{iθ})`).
    cs: Complex<T>,
    a_half: Complex<T>,
    lo: Complex<T>,
    hi: Complex<T>,
}

/// Reduced objective `F(ψ)` and its first two derivatives.
struct Reduced<T> {
    a: T,
    w: Complex<T>,
    q: Complex<T>,
    alpha: Complex<T>,
    beta: Complex<T>,
}

const SCAN_POINTS: usize = 24;
const NEWTON_ITERATIONS: usize = 60;

impl<T: Real> PreviewTerms<T> {
    fn new(l: &PhaseLikelihood<T>, shift: usize, target: usize) -> Self {
        let quarter = T::c(0.25);
        let t = target as i64;
        let s = shift as i64;
        Self {
            half_c0: l.branch_weight() * T::c(0.5),
            cs: l.get(shift),
            a_half: l.coeff(t) * T::c(0.5),
            lo: l.coeff(t - s) * quarter,
            hi: l.coeff(t + s) * quarter,
        }
    }

    /// `(c'_0(+), c'_0(−), |c'_t(+)|, |c'_t(−)|)`.
    fn at(&self, theta: T) -> (T, T, T, T) {
        let e = Complex::new(theta.cos(), theta.sin());
        let w = (self.cs * e).re * T::c(0.5);
        let b = self.lo * e.conj() + self.hi * e;
        (
            self.half_c0 + w,
            self.half_c0 - w,
            (self.a_half + b).norm(),
            (self.a_half - b).norm(),
        )
    }

    fn reduced(&self) -> Reduced<T> {
        let two = T::c(2.0);
        Reduced {
            a: self.a_half.norm_sqr() + self.lo.norm_sqr() + self.hi.norm_sqr(),
            w: self.lo.conj() * self.hi * two,
            q: self.a_half * self.a_half - self.lo * self.hi * two,
            alpha: self.lo * self.lo,
            beta: self.hi * self.hi,
        }
    }

    /// Maximizer `θ ∈ [0, π)`, or `None` when the objective does not depend on θ.
    fn maximize(&self) -> Option<T> {
        let f = self.reduced();
        let step = T::TAU() / T::from_usize(SCAN_POINTS).unwrap();
        let psi_at = |i: usize| step * T::from_usize(i).unwrap();
        let values: Vec<T> = (0..SCAN_POINTS).map(|i| f.value(psi_at(i))).collect();
        let (mut lo, mut hi) = (values[0], values[0]);
        for &v in &values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let scale = f.a + f.w.norm() + f.q.norm() + f.alpha.norm() + f.beta.norm();
        if !(scale > T::zero()) || hi - lo <= scale * T::tiny() {
            return None;
        }

        // Refine the two best local maxima of the scan; keep the better one.
        let mut peaks: Vec<usize> = (0..SCAN_POINTS)
            .filter(|&i| {
                let prev = values[(i + SCAN_POINTS - 1) % SCAN_POINTS];
                let next = values[(i + 1) % SCAN_POINTS];
                values[i] >= prev && values[i] >= next
            })
            .collect();
        peaks.sort_by(|&x, &y| values[y].partial_cmp(&values[x]).unwrap());
        peaks.truncate(2);

        let mut best = (values[peaks[0]], psi_at(peaks[0]));
        for &i in &peaks {
            let centre = psi_at(i);
            let psi = f.refine(centre - step, centre + step).unwrap_or(centre);
            let v = f.value(psi);
            if v > best.0 {
                best = (v, psi);
            }
        }
        Some(best.1.wrap_angle() * T::c(0.5))
    }
}

impl<T: Real> Reduced<T> {
    fn residual(&self, psi: T) -> (Complex<T>, Complex<T>, Complex<T>) {
        let e = Complex::new(psi.cos(), psi.sin());
        let i = Complex::new(T::zero(), T::one());
        let m = self.alpha * e.conj();
        let p = self.beta * e;
        // R, R', R''.
        (self.q - m - p, (m - p) * i, m + p)
    }

    fn value(&self, psi: T) -> T {
        let e = Complex::new(psi.cos(), psi.sin());
        self.a + (self.w * e).re + self.residual(psi).0.norm()
    }

    /// `(F', F'')`.
    fn derivatives(&self, psi: T) -> (T, T) {
        let e = Complex::new(psi.cos(), psi.sin());
        let i = Complex::new(T::zero(), T::one());
        let we = self.w * e;
        let (r, r1, r2) = self.residual(psi);
        let n = r.norm();
        let (mut d1, mut d2) = ((we * i).re, -we.re);
        if n > T::zero() {
            let g = (r.conj() * r1).re;
            d1 = d1 + g / n;
            d2 = d2 + (r1.norm_sqr() + (r.conj() * r2).re) / n - g * g / (n * n * n);
        }
        (d1, d2)
    }

    /// Safeguarded Newton on `F'` inside a bracket with `F'(lo) ≥ 0 ≥ F'(hi)`.
    /// A point is accepted only once `F'` is seen to change sign across it.
    fn refine(&self, mut lo: T, mut hi: T) -> Option<T> {
        if self.derivatives(lo).0 < T::zero() || self.derivatives(hi).0 > T::zero() {
            return None;
        }
        let tol = T::c(1e-13).max(T::epsilon() * T::c(16.0));
        let mut x = (lo + hi) * T::c(0.5);
        for _ in 0..NEWTON_ITERATIONS {
            let (d1, d2) = self.derivatives(x);
            if d1 == T::zero() {
                return Some(x);
            }
            if d1 > T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= tol {
                break;
            }
            let newton = x - d1 / d2;
            let converged = (newton - x).abs() <= tol
                && self.derivatives(newton - tol).0 >= T::zero()
                && self.derivatives(newton + tol).0 <= T::zero();
            if converged {
                return Some(newton);
            }
            x = if d2 < T::zero() && newton > lo && newton < hi && (newton - x).abs() > tol {
                newton
            } else {
                (lo + hi) * T::c(0.5)
            };
        }
        Some((lo + hi) * T::c(0.5))
    }
}
