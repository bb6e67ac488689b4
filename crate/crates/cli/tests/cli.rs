use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn backret(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backret"))
        .args(args)
        .env("BACKRET_OUT", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.contains(key)).unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn timing_reports_reversal_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = backret(dir.path(), &["timing", "--preset", "pr-yso", "--lx", "1mm", "--delta-nu", "1.11GHz"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("t_rev = 2.676 µs"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("timing.json")).unwrap()).unwrap();
    assert!((json["t_rev"].as_f64().unwrap() - 2.676e-6).abs() < 1e-9);
    assert!(dir.path().join("subradiance_times.csv").exists());
}

#[test]
fn magnetic_preset_takes_field_in_gauss() {
    let dir = tempfile::tempdir().unwrap();
    let o = backret(dir.path(), &["timing", "--preset", "er-yso", "--lx", "1mm", "--field", "70G"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("105.0000 MHz"), "{}", stdout(&o));
}

#[test]
fn bound_matches_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = backret(dir.path(), &["bound", "--eps", "0.9", "--lx-over-lambda", "133.3", "--n", "1.8"]);
    assert!(o.status.success());
    let r = value_after(&stdout(&o), "allowed");
    assert!((r / 2.14e-4 - 1.0).abs() < 0.01, "{r}");
}

#[test]
fn ideal_ensemble_is_fully_backward_at_reversal() {
    let dir = tempfile::tempdir().unwrap();
    let o = backret(dir.path(), &["ensemble", "--profile", "ideal-linear", "--n", "10000"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("backward rate at t_rev = 1.000000"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("ensemble_series.csv")).unwrap();
    assert!(csv.starts_with("t_s,r_forward,r_backward"));
}

#[test]
fn ensemble_accepts_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("p.csv");
    std::fs::write(&profile, "x_m,shift_hz\n-0.0005,1.11e9\n0.0005,-1.11e9\n").unwrap();
    let out = dir.path().join("out");
    let o = backret(&out, &["ensemble", "--profile", profile.to_str().unwrap(), "--n", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((value_after(&stdout(&o), "backward rate") - 1.0).abs() < 1e-6);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["ensemble", "--placement", "uniform", "--n", "2000", "--seed", "7"];
    assert!(backret(a.path(), &args).status.success());
    assert!(backret(b.path(), &args).status.success());
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
    let c = tempfile::tempdir().unwrap();
    assert!(backret(c.path(), &["ensemble", "--placement", "uniform", "--n", "2000", "--seed", "8"]).status.success());
    assert_ne!(snapshot(a.path())["ensemble_series.csv"], snapshot(c.path())["ensemble_series.csv"]);
}

#[test]
fn field_and_propagate_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = backret(dir.path(), &["field", "--family", "quadrupole", "--lx", "1mm", "--u", "10V", "--core", "0"]);
    assert!(o.status.success());
    let r = value_after(&stdout(&o), "δν/Δν");
    assert!((r - 4.63e-2).abs() < 1e-3, "{r}");
    let o = backret(dir.path(), &["propagate", "--sweep", "1,2,5"]);
    assert!(o.status.success());
    let files = snapshot(dir.path());
    for f in ["field.json", "shift_profile.csv", "propagation_sweep.csv", "propagation.json", "propagation_config.json"] {
        assert!(files.contains_key(f), "missing {f}");
    }
}

#[test]
fn exit_codes_separate_usage_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(backret(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(backret(dir.path(), &["timing", "--lx", "1parsec", "--delta-nu", "1GHz"]).status.code(), Some(1));
    assert_eq!(backret(dir.path(), &["timing", "--preset", "nope", "--lx", "1mm", "--delta-nu", "1GHz"]).status.code(), Some(1));
    assert_eq!(backret(dir.path(), &["propagate", "--nt", "20"]).status.code(), Some(2));
    assert_eq!(backret(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn reproduce_paper_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = backret(a.path(), &["reproduce-paper"]);
    let second = backret(b.path(), &["reproduce-paper"]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.status.code(), second.status.code());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.contains_key("summary.json") && sa.contains_key("claims.csv"));
    assert_eq!(sa, sb);
    // only the literal quadrupole check is known to miss
    let text = stdout(&first);
    let failing: Vec<&str> = text.lines().filter(|l| l.ends_with("FAIL")).collect();
    assert_eq!(failing.len(), 1, "{text}");
    assert!(failing[0].contains("quadrupole"));
    assert_eq!(first.status.code(), Some(2));
}
