use std::path::Path;
use std::process::{Command, Output};

fn noonphase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noonphase")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = noonphase(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(Result::unwrap).collect()
}

fn column(text: &str, name: &str) -> usize {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn fig2_recipe_has_a_row_per_scheme() {
    let text = ok(&["simulate", "--recipe", "fig2", "--samples", "2"]);
    let rows = rows(&text);
    assert_eq!(rows.len(), 54);
    let vh = column(&text, "vh_times_n2");
    assert!(rows.iter().all(|r| !r[vh].is_empty()));
    assert_eq!(column(&text, "schema_version"), 0);
    assert!(!text.contains('\r'));
}

#[test]
fn fig4_recipe_reports_the_repetition_bound() {
    let text = ok(&["simulate", "--recipe", "fig4", "--samples", "4"]);
    let bound = column(&text, "repetition_bound");
    let m = column(&text, "M");
    for r in rows(&text) {
        let m: f64 = r[m].parse().unwrap();
        let b: f64 = r[bound].parse().unwrap();
        assert!((b - 3.0 / (m * 31.0 * 33.0)).abs() < 1e-15);
    }
}

#[test]
fn reruns_are_byte_identical_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command": "simulate", "schemes": [{"type": "generalized_qpea", "k": 4, "m": 3},
            {"type": "nonadaptive", "k": 3, "schedule": {"type": "linear", "a": 2, "b": 3}}], "samples": 3000, "seed": 5}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    ok(&["--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    // The materialized config reproduces the run.
    let resolved = dir.path().join("a.csv.config.json");
    let c = dir.path().join("c.csv");
    ok(&["--config", resolved.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&resolved).unwrap()).unwrap();
    assert_eq!(json["sample_defaults"]["nonadaptive"], 1 << 20);
    assert_eq!(json["schemes"][1]["grid"], "half_period");
}

#[test]
fn rows_are_rederivable_from_scheme_seed_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schemes": [{"type": "generalized_qpea", "k": 2, "m": 2}, {"type": "generalized_qpea", "k": 3, "m": 1}], "samples": 500}"#,
    );
    let all = ok(&["simulate", "--config", &cfg]);
    let row = &rows(&all)[1];
    let (spec, samples, seed) = (column(&all, "spec"), column(&all, "samples"), column(&all, "seed"));
    let spec: noonphase::SchemeSpec = serde_json::from_str(&row[spec]).unwrap();
    let r = noonphase::estimate_montecarlo::<f64>(&spec, row[samples].parse().unwrap(), row[seed].parse().unwrap()).unwrap();
    let vh = column(&all, "vh_sharpness");
    assert_eq!(row[vh].parse::<f64>().unwrap(), r.vh_sharpness.to_float());
}

#[test]
fn enumerate_gives_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"schemes": [{"type": "generalized_qpea", "k": 5, "m": 1}]}"#);
    let text = ok(&["enumerate", "--config", &cfg]);
    let r = &rows(&text)[0];
    let n = 63.0;
    let vh: f64 = r[column(&text, "vh_sharpness")].parse().unwrap();
    assert!((vh - (2.0 / n + 1.0 / (n * n))).abs() < 1e-12);
    assert_eq!(&r[column(&text, "method")], "enumerate");
}

#[test]
fn sweep_has_an_error_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"schemes": [{"type": "fixed_k", "k": 2, "m": 4}], "samples": 100}"#);
    let text = ok(&["sweep", "--config", &cfg]);
    assert_eq!(&rows(&text)[0][column(&text, "error")], "");
}

#[test]
fn canonical_rows_and_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"states": [{"type": "uniform", "n": 20}]}"#);
    let text = ok(&["canonical", "--config", &cfg]);
    let vh: f64 = rows(&text)[0][column(&text, "V_H")].parse().unwrap();
    assert!((vh - (2.0 / 20.0 + 1.0 / 400.0)).abs() < 1e-13);

    let out = dir.path().join("f5.csv");
    ok(&["canonical", "--recipe", "fig5", "--out", out.to_str().unwrap()]);
    let amps = std::fs::read_to_string(dir.path().join("f5.csv.amplitudes.csv")).unwrap();
    let p: Vec<f64> = rows(&amps).iter().map(|r| r[column(&amps, "psi_sq")].parse().unwrap()).collect();
    assert_eq!(p.len(), 3101);
    let peak = p.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert_eq!(peak, 1550);
    assert!(p.iter().zip(p.iter().rev()).all(|(a, b)| (a - b).abs() <= 1e-15));

    let out = dir.path().join("f6.csv");
    ok(&["canonical", "--recipe", "fig6", "--out", out.to_str().unwrap()]);
    let amps = std::fs::read_to_string(dir.path().join("f6.csv.amplitudes.csv")).unwrap();
    let marker = column(&amps, "marker");
    let n = column(&amps, "n");
    let marked: Vec<(String, String)> =
        rows(&amps).iter().filter(|r| !r[marker].is_empty()).map(|r| (r[n].to_string(), r[marker].to_string())).collect();
    assert_eq!(marked, vec![("24".into(), "n_minus".into()), ("40".into(), "n_plus".into())]);
}

#[test]
fn table_fits_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command": "table", "groups": [{"label": "M=1", "claim": "1/N", "expected_slope": -1,
            "schemes": [{"type": "generalized_qpea", "k": 3, "m": 1}, {"type": "generalized_qpea", "k": 4, "m": 1},
                        {"type": "generalized_qpea", "k": 5, "m": 1}, {"type": "generalized_qpea", "k": 6, "m": 1}]}]}"#,
    );
    let text = ok(&["--config", &cfg]);
    let line = text.lines().find(|l| l.starts_with("M=1")).unwrap();
    let slope: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() < 0.05, "{line}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"command": "simulate", "bogus": 1}"#,
        r#"{"command": "simulate", "schemes": [{"type": "generalized_qpea", "k": 2, "m": 0}]}"#,
        r#"{"command": "simulate"}"#,
        r#"{"command": "table", "groups": [{"label": "x", "claim": "y", "schemes": [{"type": "generalized_qpea", "k": 2, "m": 1}, {"type": "generalized_qpea", "k": 3, "m": 1}, {"type": "generalized_qpea", "k": 4, "m": 1}]}]}"#,
        "not json",
    ] {
        let cfg = write(dir.path(), "bad.json", body);
        let out = noonphase(&["--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let cfg = write(dir.path(), "c.json", r#"{"command": "canonical", "states": [{"type": "uniform", "n": 2}]}"#);
    assert_eq!(noonphase(&["simulate", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(noonphase(&["simulate", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"schemes": [{"type": "generalized_qpea", "k": 9, "m": 3}]}"#);
    assert_eq!(noonphase(&["enumerate", "--config", &cfg]).status.code(), Some(3));
}
