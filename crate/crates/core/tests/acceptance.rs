//! End-to-end checks of the published numbers. Each test prints one
//! `criterion N: PASS|FAIL` line straight to stderr (bypassing capture) so
//! the verdicts show up in plain `cargo test` output.

use std::f64::consts::TAU;
use std::io::Write;

use noonphase::equivstate::{hybrid_bound, repetition_bound, two_copy_constant, CountTable};
use noonphase::schemes::{HybridIncrement, PhaseGrid, Replay, Schedule, SizeObjective};
use noonphase::{
    enumerate_exact, estimate_montecarlo, noon_outcome_prob, run_trial, FeedbackPhase, Likelihood, Outcome, RunOptions,
    SchemeSpec, State, VarianceReport,
};
use num_complex::Complex64;
use num_rational::BigRational;

// Tolerances and sample counts.
const EXACT_TOL: f64 = 1e-12;
const FEEDBACK_TOL: f64 = 1e-12;
const TWO_COPY_C: f64 = 6.5949;
const TWO_COPY_TOL: f64 = 0.05;
const M5_SAMPLES: u64 = 1 << 16;
const M5_BAND: (f64, f64) = (18.0, 30.0);
const NONADAPTIVE_SAMPLES: u64 = 1 << 20;
const NONADAPTIVE_BAND: (f64, f64) = (30.0, 51.0);
const FIXED_K_SAMPLES: u64 = 1 << 14;
const HYBRID_SAMPLES: u64 = 1 << 16;
const ADAPTIVE_SAMPLES: u64 = 1 << 12;
const ADAPTIVE_BUDGET: u64 = 2000;
const ADAPTIVE_CEILING: f64 = 70.0;
const AGREEMENT_SIGMAS: f64 = 5.0;
const QUADRATURE_TOL: f64 = 1e-9;
/// Allowed rise between successive points of a "decreasing or flat" trend,
/// in combined standard errors.
const TREND_SIGMAS: f64 = 2.0;

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn scaled(r: &VarianceReport, power: f64) -> (f64, f64) {
    let f = (r.n as f64).powf(power);
    (r.vh_sharpness.finite().unwrap() * f, r.stderr_vh * f)
}

fn qpea_register(k: u32) -> f64 {
    ((2u64 << k) - 1) as f64
}

#[test]
fn criterion_01_exact_single_repetition() {
    let mut worst = 0.0f64;
    for k in 1..=8 {
        let r = enumerate_exact::<f64>(&SchemeSpec::GeneralizedQpea { k, m: 1 }).unwrap();
        let n = qpea_register(k);
        worst = worst.max((r.vh_sharpness.finite().unwrap() - (2.0 / n + 1.0 / (n * n))).abs());
    }
    verdict(1, worst <= EXACT_TOL, &format!("max |V_H − (2/N + 1/N²)| = {worst:.2e}, K = 1..8"));
}

#[test]
fn criterion_02_exact_two_repetitions() {
    let mut worst = 0.0f64;
    for k in 1..=4 {
        let r = enumerate_exact::<f64>(&SchemeSpec::GeneralizedQpea { k, m: 2 }).unwrap();
        let n = 2.0 * qpea_register(k);
        worst = worst.max((r.vh_sharpness.finite().unwrap() - 2.0 / n).abs());
    }
    verdict(2, worst <= EXACT_TOL, &format!("max |V_H − 2/N| = {worst:.2e}, K = 1..4"));
}

#[test]
fn criterion_03_binary_fraction_feedback() {
    let mut worst = 0.0f64;
    let mut branches = 0;
    for k in 0..=6u32 {
        let spec = SchemeSpec::GeneralizedQpea { k, m: 1 };
        let len = k as usize + 1;
        for mask in 0..(1u64 << len) {
            let u: Vec<Outcome> = (0..len).map(|i| Outcome::from_bit(mask >> i & 1 == 1)).collect();
            let r = run_trial(&spec, 0.0, 0.0, &mut Replay::new(&u), RunOptions::default()).unwrap();
            for (m, phase) in r.feedback.iter().enumerate() {
                let expect: f64 = (0..m).map(|l| TAU * u[l].bit() as f64 / (1u64 << (len - l)) as f64).sum();
                let d = (phase - expect).rem_euclid(TAU);
                worst = worst.max(d.min(TAU - d));
            }
            branches += 1;
        }
    }
    verdict(3, worst <= FEEDBACK_TOL, &format!("{branches} branches, max phase gap {worst:.2e}"));
}

#[test]
fn criterion_04_equivalent_state_analytics() {
    let c = two_copy_constant(8, 15).unwrap();
    let mut ok = (c.second_order - TWO_COPY_C).abs() <= TWO_COPY_TOL;
    let mut detail = format!("M=2 constant {:.4}", c.second_order);
    for m in 3..=6usize {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        let values: Vec<f64> = (4..=13)
            .map(|e| {
                let n_k = 1usize << e;
                let n = (m * n_k) as f64;
                State::copies(n_k, m).unwrap().collett_variance() * n * n
            })
            .collect();
        let bounded = values.iter().all(|v| *v <= fact * (m * m) as f64);
        let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let settling = steps.windows(2).all(|s| s[1] <= s[0] * (1.0 + 1e-9));
        ok &= bounded && settling;
        detail += &format!("; M={m} N²V_C → {:.4}", values.last().unwrap());
    }
    verdict(4, ok, &detail);
}

#[test]
fn criterion_05_exact_moments() {
    let mut ok = true;
    for m in 1..=6u64 {
        for n_k in [1u64, 2, 3, 10, 127, 512, 1023] {
            let mo = CountTable::copies(n_k as usize, m as usize).unwrap().number_moments();
            ok &= mo.mean == BigRational::new((m * n_k).into(), 2u64.into());
            ok &= mo.variance == BigRational::new((m * n_k * (n_k + 2)).into(), 12u64.into());
        }
    }
    for m in [0u64, 1, 2, 7, 64, 256] {
        for n_k in [1u64, 15, 127, 1023] {
            let mo = CountTable::hybrid(n_k as usize, m as usize).unwrap().number_moments();
            ok &= mo.mean == BigRational::new((n_k + m).into(), 2u64.into());
            ok &= mo.variance == BigRational::new((3 * m + 2 * n_k + n_k * n_k).into(), 12u64.into());
        }
    }
    verdict(5, ok, "copies and hybrid moments, exact rationals");
}

#[test]
fn criterion_06_five_repetitions() {
    let mut points = Vec::new();
    for k in 6..=9 {
        let r = estimate_montecarlo::<f64>(&SchemeSpec::GeneralizedQpea { k, m: 5 }, M5_SAMPLES, 6).unwrap();
        points.push(scaled(&r, 2.0));
    }
    let in_band = points.iter().all(|p| p.0 >= M5_BAND.0 && p.0 <= M5_BAND.1);
    let trend = points.windows(2).all(|w| w[1].0 <= w[0].0 + TREND_SIGMAS * w[0].1.hypot(w[1].1));
    let detail: Vec<String> = points.iter().map(|p| format!("{:.2}±{:.2}", p.0, p.1)).collect();
    verdict(6, in_band && trend, &format!("V_H N², K = 6..9: {}", detail.join(", ")));
}

#[test]
fn criterion_07_level_dependent_nonadaptive() {
    let mut points = Vec::new();
    for k in 6..=8 {
        let spec = SchemeSpec::Nonadaptive {
            k,
            schedule: Schedule::Linear { a: 2, b: 3 },
            grid: PhaseGrid::HalfPeriod,
        };
        let r = estimate_montecarlo::<f64>(&spec, NONADAPTIVE_SAMPLES, 7).unwrap();
        points.push(scaled(&r, 2.0));
    }
    let ok = points.iter().all(|p| p.0 >= NONADAPTIVE_BAND.0 && p.0 <= NONADAPTIVE_BAND.1);
    let detail: Vec<String> = points.iter().map(|p| format!("{:.2}±{:.2}", p.0, p.1)).collect();
    verdict(7, ok, &format!("V_H N², K = 6..8: {}", detail.join(", ")));
}

#[test]
fn criterion_08_fixed_register() {
    let n_k = qpea_register(4);
    let mut above = true;
    let mut large = Vec::new();
    for e in 0..=7 {
        let m = 1usize << e;
        let r = estimate_montecarlo::<f64>(&SchemeSpec::FixedK { k: 4, m }, FIXED_K_SAMPLES, 8).unwrap();
        let vh = r.vh_sharpness.finite().unwrap();
        above &= vh >= repetition_bound::<f64>(n_k as u64, m as u64);
        if m >= 16 {
            let n = r.n as f64;
            large.push((n.ln(), (vh * n * n).ln()));
        }
    }
    // Slope of ln(V_H N²) against ln N.
    let k = large.len() as f64;
    let mx = large.iter().map(|p| p.0).sum::<f64>() / k;
    let my = large.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = large.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / large.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let linear = (0.8..=1.2).contains(&slope);
    verdict(8, above && linear, &format!("above repetition bound: {above}; V_H N² ∝ N^{slope:.3} for M ≥ 16"));
}

#[test]
fn criterion_09_hybrid() {
    let mut bound_ok = true;
    for k in 2..=9u32 {
        for m in [1usize, 4, 16, 64, 256, 1024] {
            let n_k = (2usize << k) - 1;
            let vh = State::hybrid(n_k, m).unwrap().holevo_variance().finite().unwrap();
            bound_ok &= vh >= hybrid_bound::<f64>(n_k as u64, m as u64);
        }
    }
    let mut points = Vec::new();
    for k in 4..=8u32 {
        let spec = SchemeSpec::Hybrid {
            k,
            m: 1 << k,
            increment: HybridIncrement::PiOverTwo,
        };
        let r = estimate_montecarlo::<f64>(&spec, HYBRID_SAMPLES, 9).unwrap();
        points.push(scaled(&r, 1.5));
    }
    let rising = points.last().unwrap().0 > points[0].0
        && points.windows(2).all(|w| w[1].0 >= w[0].0 - TREND_SIGMAS * w[0].1.hypot(w[1].1));
    let detail: Vec<String> = points.iter().map(|p| format!("{:.3}±{:.3}", p.0, p.1)).collect();
    verdict(
        9,
        bound_ok && rising,
        &format!("state bound held: {bound_ok}; V_H N^1.5, K = 4..8: {}", detail.join(", ")),
    );
}

#[test]
fn criterion_10_size_adaptive() {
    let run = |objective| {
        let spec = SchemeSpec::AdaptiveSize {
            budget: ADAPTIVE_BUDGET,
            objective,
            warmup: 10,
        };
        let r = estimate_montecarlo::<f64>(&spec, ADAPTIVE_SAMPLES, 1).unwrap();
        let n2 = (r.n * r.n) as f64;
        (r.vh_sharpness.finite().unwrap() * n2, r.vh_empirical.finite().unwrap() * n2)
    };
    let entropy = run(SizeObjective::EntropyC { c: -TAU.ln() });
    let direct = run(SizeObjective::VhN2);
    let ok = entropy.0 <= ADAPTIVE_CEILING && entropy.1 <= ADAPTIVE_CEILING && entropy.0 < direct.0 && entropy.1 < direct.1;
    verdict(
        10,
        ok,
        &format!(
            "V_H N² entropy {:.1} (sampled {:.1}) vs vh_n2 {:.1} (sampled {:.1})",
            entropy.0, entropy.1, direct.0, direct.1
        ),
    );
}

fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn criterion_11_invariants() {
    let mut state = 2024u64;
    let mut conservation = 0.0f64;
    let mut hermiticity = 0.0f64;
    let mut covariance = 0.0f64;
    let mut quadrature = 0.0f64;
    for _ in 0..40 {
        let mut dets = Vec::new();
        let mut used = 0;
        loop {
            let nu = 1 + (lcg(&mut state) * 6.0) as u64;
            if used + nu > 64 {
                break;
            }
            used += nu;
            dets.push((nu, lcg(&mut state) * TAU, Outcome::from_bit(lcg(&mut state) < 0.5)));
        }
        let delta = lcg(&mut state) * TAU;
        let mut l = Likelihood::flat(64, 0).unwrap();
        let mut moved = Likelihood::flat(64, 0).unwrap();
        for &(nu, phi, u) in &dets {
            let fb = FeedbackPhase::new(phi).unwrap();
            let [a, b] = l.children(fb, nu).unwrap();
            conservation = conservation.max((a.branch_weight() + b.branch_weight() - l.branch_weight()).abs() / l.branch_weight());
            l = l.update(u, fb, nu).unwrap();
            moved = moved.update(u, fb.shifted(delta), nu).unwrap();
        }
        let c0 = l.branch_weight();
        for g in 0..1024 {
            hermiticity = hermiticity.max(l.evaluate(TAU * g as f64 / 1024.0).im.abs() / c0);
        }
        for j in 0..=64i64 {
            let rotated = l.coeff(j) * Complex64::from_polar(1.0, -(j as f64) * delta);
            covariance = covariance.max((moved.coeff(j) - rotated).norm() / c0);
            let mut q = Complex64::default();
            for g in 0..256 {
                let phi = TAU * g as f64 / 256.0;
                let p: f64 = dets
                    .iter()
                    .map(|&(nu, fb, u)| noon_outcome_prob(u, phi, nu, FeedbackPhase::new(fb).unwrap()))
                    .product();
                q += p * Complex64::from_polar(1.0, -(j as f64) * phi);
            }
            quadrature = quadrature.max((l.coeff(j) - q / 256.0).norm() / c0);
        }
    }
    let specs = [
        SchemeSpec::GeneralizedQpea { k: 5, m: 3 },
        SchemeSpec::GeneralizedQpea { k: 6, m: 1 },
        SchemeSpec::Nonadaptive {
            k: 4,
            schedule: Schedule::Constant { m: 6 },
            grid: PhaseGrid::HalfPeriod,
        },
        SchemeSpec::Hybrid {
            k: 3,
            m: 8,
            increment: HybridIncrement::PiOverM,
        },
    ];
    let mut agreement = 0.0f64;
    for (i, spec) in specs.iter().enumerate() {
        let r = estimate_montecarlo::<f64>(spec, 1 << 16, 100 + i as u64).unwrap();
        agreement = agreement.max(r.estimator_discrepancy());
    }
    let ok = conservation <= 1e-14
        && hermiticity <= 1e-12
        && covariance <= 1e-12
        && quadrature <= QUADRATURE_TOL
        && agreement <= AGREEMENT_SIGMAS;
    verdict(
        11,
        ok,
        &format!(
            "conservation {conservation:.1e}, hermiticity {hermiticity:.1e}, covariance {covariance:.1e}, quadrature {quadrature:.1e}, estimator gap {agreement:.2}σ"
        ),
    );
}
