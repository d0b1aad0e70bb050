//! End-to-end checks of the command-line interface against the bundled
//! datasets: output files, determinism, config round-trips, and the
//! machine-readable error path.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_copent")
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn copent")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn kv(body: &str, key: &str) -> String {
    body.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing key {key} in:\n{body}"))
        .to_string()
}

#[test]
fn fit_writes_coefficient_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit",
        "--data",
        fixtures().join("madawaska.csv").to_str().unwrap(),
        "--phase1-rows",
        "70",
        "--dep-policy",
        "fixed-all",
        "--support-x",
        "0,300",
        "--support-y",
        "0,20000",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let marginals = read(tmp.path(), "marginals.txt");
    // slopes match the published marginal coefficients on these supports
    let lx: f64 = kv(&marginals, "margin_x.lambda1").parse().unwrap();
    let ly: f64 = kv(&marginals, "margin_y.lambda1").parse().unwrap();
    assert!((lx - 0.0108226).abs() < 2e-6, "lambda_x = {lx}");
    assert!((ly - 2.759943e-5).abs() < 2e-9, "lambda_y = {ly}");
    let copula = read(tmp.path(), "copula.txt");
    assert!(copula.contains("lambda0="));
    assert!(copula.contains("lambda_u2v2="));
    let model = read(tmp.path(), "model.txt");
    assert!(model.contains("copula.lambda0="));
    read(tmp.path(), "effective-config");
}

#[test]
fn phase1_reproduces_the_production_stage_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "phase1",
        "--data",
        fixtures().join("quesenberry.csv").to_str().unwrap(),
        "--phase1-rows",
        "20",
        "--r",
        "4",
        "--support-x",
        "0,inf",
        "--support-y",
        "0,100",
        "--dep-policy",
        "fixed-phase1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stages = read(tmp.path(), "stages.csv");
    let lines: Vec<&str> = stages.lines().collect();
    assert!(lines[1].starts_with("1,20,") && lines[1].ends_with("2;14;16;18;20"));
    assert!(lines[2].starts_with("2,15,") && lines[2].ends_with("17"));
    assert!(lines[3].starts_with("3,14,") && lines[3].ends_with("5"));
    assert!(lines[4].starts_with("4,13,") && lines[4].ends_with(","));
    let design = read(tmp.path(), "design.txt");
    let ucl: f64 = kv(&design, "ucl").parse().unwrap();
    assert!((ucl - 2.87983).abs() <= 0.15 * 2.87983, "ucl = {ucl}");
    assert_eq!(kv(&design, "lcl"), "0");
    // phase-II rows 21..30 are classified in the same report
    assert!(stages.contains("phase2_row,t2,out_of_control"));
    for row in [21, 22, 24, 25, 28, 29] {
        let line = stages
            .lines()
            .find(|l| l.starts_with(&format!("{row},")))
            .unwrap();
        assert!(line.ends_with("true"), "row {row} should be out of control");
    }
}

#[test]
fn chart_flags_are_consistent_with_t2_vs_ucl() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "chart",
        "--data",
        fixtures().join("madawaska.csv").to_str().unwrap(),
        "--phase1-rows",
        "70",
        "--dep-policy",
        "fixed-all",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let chart = read(tmp.path(), "chart.csv");
    let mut rows = 0;
    for line in chart.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let t2: f64 = f[1].parse().unwrap();
        let flag: bool = f[2].parse().unwrap();
        let ucl: f64 = f[3].parse().unwrap();
        assert_eq!(flag, t2 > ucl, "row {line}");
        assert_eq!(f[4], "0");
        rows += 1;
    }
    assert_eq!(rows, 110);
    let svg = read(tmp.path(), "chart.svg");
    assert!(svg.starts_with("<svg") && svg.contains("UCL="));
}

#[test]
fn arl_runs_are_deterministic_and_configs_round_trip() {
    let tmp1 = tempfile::tempdir().unwrap();
    let tmp2 = tempfile::tempdir().unwrap();
    let common = [
        "arl",
        "--mu-x",
        "3",
        "--mu-y",
        "5",
        "--rho",
        "0.2",
        "--nu1",
        "0.2",
        "--eta",
        "0.5666667",
        "--reps",
        "200",
        "--delta-grid",
        "0,1",
        "--seed",
        "42",
    ];
    let out1 = run(&[&common[..], &["--out", tmp1.path().to_str().unwrap()]].concat());
    assert!(
        out1.status.success(),
        "{}",
        String::from_utf8_lossy(&out1.stderr)
    );
    // re-feed the effective config; only the output directory differs
    let cfg_path = tmp1.path().join("effective-config");
    let out2 = run(&[
        "arl",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        tmp2.path().to_str().unwrap(),
    ]);
    assert!(
        out2.status.success(),
        "{}",
        String::from_utf8_lossy(&out2.stderr)
    );
    let t1 = read(tmp1.path(), "arl_table.csv");
    let t2 = read(tmp2.path(), "arl_table.csv");
    assert_eq!(t1, t2, "same config and seed must give identical tables");
    // the zero-shift cell sits near 1/alpha
    let first = t1.lines().nth(1).unwrap();
    let mean: f64 = first.split(',').nth(2).unwrap().parse().unwrap();
    assert!((10.0..40.0).contains(&mean), "in-control ARL = {mean}");
}

#[test]
fn ucl_at_alpha_half_matches_a_monte_carlo_quantile() {
    // independence with unit-exponential margins; the T2 median of the
    // fitted density should match a simple Monte Carlo quantile oracle
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "ucl",
        "--mu-x",
        "1",
        "--mu-y",
        "1",
        "--rho",
        "0",
        "--nu1",
        "0",
        "--eta",
        "0.4666666667",
        "--alpha",
        "0.5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let design = read(tmp.path(), "design.txt");
    let ucl: f64 = kv(&design, "ucl").parse().unwrap();
    let cov: f64 = kv(&design, "achieved_coverage").parse().unwrap();
    assert!((0.5..0.502).contains(&cov), "coverage {cov}");

    // xorshift64* Monte Carlo of the median of (X-1)^2 + (Y-1)^2
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
    };
    let n = 2_000_000usize;
    let mut draws: Vec<f64> = (0..n)
        .map(|_| {
            let x = -(1.0 - next()).ln();
            let y = -(1.0 - next()).ln();
            (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0)
        })
        .collect();
    let mid = n / 2;
    draws.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let mc_median = draws[mid];
    assert!(
        (ucl - mc_median).abs() < 0.02,
        "ucl {ucl} vs MC median {mc_median}"
    );
}

#[test]
fn preset_groups_fail_with_a_machine_readable_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "arl",
        "--group",
        "3",
        "--mu-x",
        "3",
        "--mu-y",
        "5",
        "--reps",
        "10",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.starts_with("error:") && err.contains("no copula-form density"),
        "stderr: {err}"
    );
}

#[test]
fn missing_column_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "fit",
        "--data",
        fixtures().join("quesenberry.csv").to_str().unwrap(),
        "--col-x",
        "nonexistent",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column"));
}

#[test]
fn empty_data_section_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("empty.csv");
    std::fs::write(&csv, "x,y\n").unwrap();
    let out = run(&[
        "fit",
        "--data",
        csv.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.conf");
    std::fs::write(&cfg, "alpha=0.05\nbanana=1\n").unwrap();
    let out = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn env_overrides_reach_the_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args([
            "fit",
            "--data",
            fixtures().join("quesenberry.csv").to_str().unwrap(),
            "--phase1-rows",
            "20",
            "--r",
            "4",
            "--support-y",
            "0,100",
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .env("COPENT_ALPHA", "0.10")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let eff = read(tmp.path(), "effective-config");
    assert_eq!(kv(&eff, "alpha"), "0.1");
}
