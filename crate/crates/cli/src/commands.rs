use std::io::Write;
use std::path::{Path, PathBuf};

use noonphase::equivstate::{copies_collett_bound, heisenberg_limit_stddev, hybrid_bound, repetition_bound, standard_quantum_limit, CountTable};
use noonphase::montecarlo::{derive_seed, resource_curve};
use noonphase::{enumerate_exact, estimate_montecarlo, SchemeSpec, Variance, VarianceReport};

use crate::config::{Command, ExperimentConfig, StateSpec, SCHEMA_VERSION};
use crate::error::CliError;

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if (cfg.amplitudes || cfg.curve) && cfg.out.is_none() && matches!(cfg.command(), Command::Canonical | Command::Simulate) {
        return Err(CliError::Config("amplitude and curve dumps need an output path".into()));
    }
    match cfg.command() {
        Command::Simulate => schemes(cfg, Mode::Simulate),
        Command::Sweep => schemes(cfg, Mode::Sweep),
        Command::Enumerate => schemes(cfg, Mode::Enumerate),
        Command::Canonical => canonical(cfg),
        Command::Table => table(cfg),
    }?;
    if let Some(out) = &cfg.out {
        let mut text = serde_json::to_string_pretty(cfg)?;
        text.push('\n');
        std::fs::write(sibling(out, "config.json"), text)?;
    }
    Ok(())
}

/// `<out>.<suffix>` next to the main output.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn open(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Simulate,
    Sweep,
    Enumerate,
}

fn num(x: f64) -> String {
    Variance::Finite(x).to_string()
}

fn var(v: Variance<f64>) -> String {
    v.to_string()
}

/// Resources of one QPEA pass at top level `K`.
fn register(k: u32) -> u64 {
    (2u64 << k) - 1
}

fn schemes(cfg: &ExperimentConfig, mode: Mode) -> Result<(), CliError> {
    let mut w = open(cfg.out.as_deref())?;
    let mut header: Vec<&str> = vec![
        "schema_version",
        "scheme",
        "spec",
        "method",
        "K",
        "M",
        "N",
        "samples",
        "seed",
        "mu_sharpness",
        "vh_sharpness",
        "mu_empirical",
        "vh_empirical",
        "stderr",
        "stderr_empirical",
        "vh_times_n2",
    ];
    let refs = cfg.references;
    if refs.heisenberg {
        header.push("heisenberg");
    }
    if refs.sql {
        header.push("sql");
    }
    if refs.repetition_bound {
        header.push("repetition_bound");
    }
    if mode == Mode::Sweep {
        header.push("error");
    }
    w.write_record(&header)?;

    let mut curves = Vec::new();
    for (i, spec) in cfg.schemes.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        let samples = cfg.samples_for(spec);
        let result = match mode {
            Mode::Enumerate => enumerate_exact::<f64>(spec),
            _ => estimate_montecarlo::<f64>(spec, samples, seed),
        };
        let report = match result {
            Ok(r) => Some(r),
            Err(e) if mode == Mode::Sweep => {
                eprintln!("{spec}: {e}");
                let mut row = describe(spec, mode, samples, seed)?;
                row.resize(header.len() - 1, String::new());
                row.push(e.to_string());
                w.write_record(&row)?;
                None
            }
            Err(e) => return Err(e.into()),
        };
        let Some(r) = report else { continue };
        let mut row = describe(spec, mode, r.samples, r.seed)?;
        row.extend(stats(&r));
        let n = spec.nominal_resources();
        if refs.heisenberg {
            let s: f64 = heisenberg_limit_stddev(n);
            row.push(num(s * s));
        }
        if refs.sql {
            row.push(if n > 0 { num(standard_quantum_limit(n)) } else { String::new() });
        }
        if refs.repetition_bound {
            row.push(match (spec.top_level(), spec.repetitions()) {
                (Some(k), Some(m)) if !matches!(spec, SchemeSpec::Hybrid { .. }) => num(repetition_bound(register(k), m as u64)),
                _ => String::new(),
            });
        }
        if mode == Mode::Sweep {
            row.push(String::new());
        }
        w.write_record(&row)?;
        if cfg.curve && mode != Mode::Enumerate && matches!(spec, SchemeSpec::AdaptiveSize { .. }) {
            curves.push((spec, samples, seed));
        }
    }
    w.flush()?;

    if let (false, Some(out)) = (curves.is_empty(), &cfg.out) {
        let mut c = open(Some(&sibling(out, "curve.csv")))?;
        c.write_record([
            "schema_version",
            "scheme",
            "samples",
            "seed",
            "N",
            "mu_sharpness",
            "vh_sharpness",
            "mu_empirical",
            "vh_empirical",
            "vh_times_n2",
        ])?;
        for (spec, samples, seed) in curves {
            for p in resource_curve::<f64>(spec, samples, seed)? {
                let n2 = (p.n * p.n) as f64;
                c.write_record([
                    SCHEMA_VERSION.to_string(),
                    spec.to_string(),
                    samples.to_string(),
                    seed.to_string(),
                    p.n.to_string(),
                    num(p.mu_sharpness),
                    var(p.vh_sharpness),
                    num(p.mu_empirical),
                    var(p.vh_empirical),
                    var(p.vh_sharpness.scaled(n2)),
                ])?;
            }
        }
        c.flush()?;
    }
    Ok(())
}

fn describe(spec: &SchemeSpec, mode: Mode, samples: u64, seed: u64) -> Result<Vec<String>, CliError> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    Ok(vec![
        SCHEMA_VERSION.to_string(),
        spec.to_string(),
        serde_json::to_string(spec)?,
        if mode == Mode::Enumerate { "enumerate" } else { "montecarlo" }.to_string(),
        opt(spec.top_level().map(|k| k.to_string())),
        opt(spec.repetitions().map(|m| m.to_string())),
        spec.nominal_resources().to_string(),
        samples.to_string(),
        seed.to_string(),
    ])
}

fn stats(r: &VarianceReport) -> Vec<String> {
    vec![
        num(r.mu_sharpness),
        var(r.vh_sharpness),
        num(r.mu_empirical),
        var(r.vh_empirical),
        num(r.stderr_vh),
        num(r.stderr_vh_empirical),
        var(r.vh_times_n2()),
    ]
}

fn canonical(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut w = open(cfg.out.as_deref())?;
    w.write_record([
        "schema_version",
        "state",
        "N_K",
        "M",
        "N",
        "V_C",
        "V_H",
        "vc_times_n2",
        "vh_times_n2",
        "mean",
        "variance",
        "mean_exact",
        "variance_exact",
        "lower_bound",
        "vc_upper_bound",
    ])?;
    let mut tables = Vec::new();
    for s in &cfg.states {
        let table = match *s {
            StateSpec::Uniform { n } => CountTable::uniform(n),
            StateSpec::Copies { n_k, m } => CountTable::copies(n_k, m)?,
            StateSpec::Hybrid { n_k, m } => CountTable::hybrid(n_k, m)?,
        };
        let state = table.to_state::<f64>();
        let (n_k, m) = s.shape();
        let n = state.photon_number();
        let n2 = (n * n) as f64;
        let vc = state.collett_variance();
        let vh = state.holevo_variance();
        let moments = state.number_moments();
        let exact = table.number_moments();
        let (lower, upper) = match s {
            StateSpec::Uniform { .. } => (String::new(), String::new()),
            StateSpec::Copies { .. } => (
                num(repetition_bound(n_k as u64, m as u64)),
                num(copies_collett_bound(n_k as u64, m as u64)),
            ),
            StateSpec::Hybrid { .. } => (num(hybrid_bound(n_k as u64, m as u64)), String::new()),
        };
        w.write_record([
            SCHEMA_VERSION.to_string(),
            s.label().to_string(),
            n_k.to_string(),
            m.to_string(),
            n.to_string(),
            num(vc),
            var(vh),
            num(vc * n2),
            var(vh.scaled(n2)),
            num(moments.mean),
            num(moments.variance),
            exact.mean.to_string(),
            exact.variance.to_string(),
            lower,
            upper,
        ])?;
        tables.push((s, table, state));
    }
    w.flush()?;

    if let (true, Some(out)) = (cfg.amplitudes, &cfg.out) {
        let mut a = open(Some(&sibling(out, "amplitudes.csv")))?;
        a.write_record(["schema_version", "state", "N_K", "M", "n", "f", "psi_sq", "marker"])?;
        for (s, table, state) in &tables {
            let (n_k, m) = s.shape();
            let markers = match s {
                StateSpec::Hybrid { .. } => {
                    let root = (m as f64).sqrt();
                    let half = m as f64 / 2.0;
                    Some(((half - root).floor() as i64, (half + root).floor() as i64))
                }
                _ => None,
            };
            for (n, (f, psi)) in table.counts().iter().zip(state.amps()).enumerate() {
                let marker = match markers {
                    Some((lo, _)) if lo == n as i64 => "n_minus",
                    Some((_, hi)) if hi == n as i64 => "n_plus",
                    _ => "",
                };
                a.write_record([
                    SCHEMA_VERSION.to_string(),
                    s.label().to_string(),
                    n_k.to_string(),
                    m.to_string(),
                    n.to_string(),
                    f.to_string(),
                    num(psi * psi),
                    marker.to_string(),
                ])?;
            }
        }
        a.flush()?;
    }
    Ok(())
}

/// Least-squares slope and its standard error.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let resid: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Some((slope, (resid / (n - 2.0) / sxx).sqrt()))
}

/// Minimum number of distinct `N` values the table command fits.
pub const MIN_FIT_POINTS: usize = 4;

fn table(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut lines = vec![format!(
        "{:<28} {:>12} {:>6} {:>16} {:>10}  {}",
        "scheme", "N range", "points", "fitted slope", "expected", "claimed scaling"
    )];
    let mut index = 0u64;
    for g in &cfg.groups {
        let mut points = Vec::new();
        for spec in &g.schemes {
            let seed = derive_seed(cfg.seed, index);
            index += 1;
            let enumerable = spec.detections().is_some_and(|d| d <= cfg.enumerate_up_to);
            let r = if enumerable {
                enumerate_exact::<f64>(spec)?
            } else {
                estimate_montecarlo::<f64>(spec, cfg.samples_for(spec), seed)?
            };
            if let Some(v) = r.vh_sharpness.finite().filter(|v| *v > 0.0) {
                points.push((r.n as f64, v));
            }
        }
        let mut ns: Vec<u64> = points.iter().map(|p| p.0 as u64).collect();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < MIN_FIT_POINTS {
            return Err(CliError::Fit(format!(
                "{}: only {} usable N values, need {MIN_FIT_POINTS}",
                g.label,
                ns.len()
            )));
        }
        let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
        let (slope, se) = fit_slope(&logs).ok_or_else(|| CliError::Fit(format!("{}: degenerate fit", g.label)))?;
        let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
        lines.push(format!(
            "{:<28} {:>12} {:>6} {:>16} {:>10}  {}",
            g.label,
            format!("{lo}-{hi}"),
            points.len(),
            format!("{slope:.3} ± {se:.3}"),
            g.expected_slope.map(|e| format!("{e:.2}")).unwrap_or_default(),
            g.claim
        ));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    match &cfg.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::fit_slope;

    #[test]
    fn exact_line_has_zero_error() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 3.0 - 1.5 * i as f64)).collect();
        let (slope, err) = fit_slope(&pts).unwrap();
        assert!((slope + 1.5).abs() < 1e-14);
        assert!(err < 1e-14);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(fit_slope(&[(0.0, 1.0), (1.0, 2.0)]).is_none());
        assert!(fit_slope(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]).is_none());
    }
}
