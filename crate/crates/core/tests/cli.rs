//! End-to-end runs of the `affine-riccati` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use affine_riccati::builtin;
use affine_riccati::model_file::load_model;
use common::kr_closed;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affine-riccati")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of a `key: value` report line.
fn field<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn solve_kr2014_matches_closed_form() {
    let out = run(&["solve", "--model", "kr2014", "--u0", "-1", "--T", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("t,psi_1,phi\n"));
    assert!(text.trim_end().ends_with("# status=Completed"));
    let rows = rows(&text);
    assert!(rows.len() > 10);
    for r in rows {
        assert!((r[1] - kr_closed(-1.0, r[0])).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn solve_reports_blowup_with_exit_2() {
    let out = run(&["solve", "--model", "feller", "--u0", "2", "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    let footer = text.lines().last().unwrap();
    let t_star: f64 = footer.strip_prefix("# status=BlowUp t*≈").expect(footer).parse().unwrap();
    assert!((t_star - 2f64.ln()).abs() < 1e-3 * 2f64.ln());
}

#[test]
fn solve_from_zero_stays_at_zero() {
    let out = run(&["solve", "--model", "feller", "--u0", "0", "--T", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(rows(&stdout(&out)).iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
}

#[test]
fn solve_writes_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--model", "kr2014", "--u0", "0.5", "--T", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,psi_1,phi"));
}

#[test]
fn conservative_verdicts_and_exit_codes() {
    for model in ["kr2014", "feller"] {
        let out = run(&["conservative", "--model", model]);
        assert_eq!(out.status.code(), Some(0), "{model}");
        assert_eq!(field(&stdout(&out), "kind"), "Conservative");
    }
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["conservative", "--model", "kr2014", "--tilt", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert_eq!(field(&text, "kind"), "NonConservative");
    let csv = std::fs::read_to_string(Path::new(field(&text, "witness_csv"))).unwrap();
    let rows = rows(&csv);
    // the witness is -(1 - e^{-t/2})²
    let worst = rows.iter().map(|r| (r[1] + (1.0 - (-r[0] / 2.0).exp()).powi(2)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn martingale_verdicts_and_exit_codes() {
    let out = run(&["martingale", "--model", "kr2014", "--theta", "1", "--l", "0", "--lambda", "0"]);
    assert_eq!(field(&stdout(&out), "kind"), "StrictLocalMartingale");
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["martingale", "--model", "feller", "--theta", "0.5", "--auto-discount"]);
    assert_eq!(field(&stdout(&out), "kind"), "TrueMartingale");
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["martingale", "--model", "feller", "--theta", "0.5", "--l", "99", "--lambda", "0"]);
    let text = stdout(&out);
    assert_eq!(field(&text, "kind"), "NotApplicable");
    assert!(field(&text, "failed_condition").starts_with("F(θ)≠l"));
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn check_formula_at_zero_is_exact() {
    let out = run(&["check-formula", "--model", "feller", "--u", "0", "--T", "1", "--x0", "1", "--npaths", "200"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(field(&stdout(&out), "z").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn check_formula_beyond_blowup_is_not_applicable() {
    let out = run(&["check-formula", "--model", "feller", "--u", "2", "--T", "1", "--x0", "1", "--npaths", "10"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(field(&stdout(&out), "result"), "formula not applicable at this (u,T)");
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--model", "cir-jump", "--x0", "0.5", "--T", "1", "--npaths", "300", "--dt", "0.01", "--seed", "4",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let threaded = Command::new(env!("CARGO_BIN_EXE_affine-riccati"))
        .args(args)
        .env("AFFINE_RICCATI_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(a.stdout, threaded.stdout);
}

#[test]
fn simulate_writes_ensemble_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate", "--model", "feller", "--x0", "1", "--T", "1", "--npaths", "20", "--dt", "0.01", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("path,T,X_1,survived"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("solve", &["--model", "--u0", "--T", "--rtol", "--atol", "--out"]),
        ("conservative", &["--model", "--tilt", "--rtol", "--atol", "--out"]),
        ("martingale", &["--model", "--theta", "--l", "--lambda", "--auto-discount", "--rtol", "--atol", "--out"]),
        (
            "simulate",
            &[
                "--model", "--x0", "--T", "--npaths", "--dt", "--seed", "--jump-trunc", "--theta", "--l", "--lambda",
                "--auto-discount", "--out",
            ],
        ),
        ("check-formula", &["--model", "--u", "--x0", "--T", "--npaths", "--dt", "--seed", "--jump-trunc"]),
        ("export-model", &["--model", "--out"]),
    ];
    for (cmd, flags) in expected {
        let out = run(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let text = stdout(&out);
        for flag in *flags {
            assert!(text.contains(&format!("{flag} ")), "{cmd} --help lacks {flag}\n{text}");
        }
    }
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["solve", "--model", "feller", "--u0", "0", "--T", "1", "--bogus"][..],
        &["solve", "--model", "nonexistent", "--u0", "0", "--T", "1"],
        &["solve", "--model", "feller", "--u0", "0,1", "--T", "1"],
        &["simulate", "--model", "feller", "--x0", "-1", "--T", "1"],
        &["martingale", "--model", "feller", "--theta", "1", "--auto-discount", "--l", "0"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn export_model_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in builtin::NAMES {
        let path = dir.path().join(format!("{name}.toml"));
        let out = run(&["export-model", "--model", name, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(load_model(&path).unwrap(), builtin::by_name(name).unwrap());
        // and the file is usable as a model source
        let out = run(&["conservative", "--model", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}");
    }
}
