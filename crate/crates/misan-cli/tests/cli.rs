//! End-to-end tests of the `misan` binary: exit codes, determinism, and
//! artifact shape.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_misan"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("misan-cli-{}-{tag}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_attractive_separates_monotone_from_nonmonotone_models() {
    let ok = bin().args(["check-attractive", "--config"]).arg(fixture("stp.toml")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr(&ok));
    assert!(stdout(&ok).contains("attractive"));

    let bad = bin()
        .args(["check-attractive", "--config"])
        .arg(fixture("zrp_nonmonotone.toml"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    assert!(text.contains("NOT attractive"), "missing verdict: {text}");
    assert!(text.contains("quadruple"), "missing witness: {text}");
}

#[test]
fn config_errors_name_the_missing_slot() {
    let out = bin()
        .args(["check-attractive", "--config"])
        .arg(fixture("s2ep_missing_rate.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("rates.g1_10"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = scratch("badkey");
    let path = dir.join("bad.toml");
    fs::write(&path, "[model]\nfamily = \"stp\"\n\n[rates]\np1 = 1.0\npm1 = 0.0\nbogus = 3\n")
        .unwrap();
    let out = bin().args(["check-attractive", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus"), "stderr: {}", stderr(&out));
}

#[test]
fn simulate_reruns_are_byte_identical_and_job_count_invariant() {
    let dir = scratch("sim");
    let out_path = dir.join("profile.csv");
    let run = |jobs: &str| {
        let out = bin()
            .args(["simulate", "--config"])
            .arg(fixture("sep_asym.toml"))
            .args(["--L", "32", "--T", "2", "--rho", "0.5", "--seed", "7"])
            .args(["--replicas", "3", "--block", "8", "--jobs", jobs, "--out"])
            .arg(&out_path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        fs::read_to_string(&out_path).unwrap()
    };
    let first = run("1");
    let second = run("1");
    assert_eq!(first, second, "same command must rewrite identical bytes");

    let parallel = run("3");
    let rows = |text: &str| {
        text.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect::<Vec<_>>()
    };
    assert_eq!(rows(&first), rows(&parallel), "jobs must not change merged rows");

    assert!(first.starts_with("# misan "), "header must lead the file");
    assert!(first.contains("# seed: 7"));
    assert!(first.contains("# config: family = \"sep\""));
    assert!(first.contains("# columns: replica,x,density"));
}

#[test]
fn detect_exchanges_finds_deep_batches_only_where_they_exist() {
    let none =
        bin().args(["detect-exchanges", "--config"]).arg(fixture("stp.toml")).output().unwrap();
    assert_eq!(none.status.code(), Some(0));

    let some = bin()
        .args(["detect-exchanges", "--config"])
        .arg(fixture("s2ep_exchange.toml"))
        .output()
        .unwrap();
    assert_eq!(some.status.code(), Some(1));
    assert!(stdout(&some).contains("exchange entries present"));
}

#[test]
fn check_ic_accepts_the_asymmetric_exclusion_kernel() {
    let out = bin().args(["check-ic", "--config"]).arg(fixture("sep_asym.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("satisfied"));
}

#[test]
fn regress_table1_passes_on_a_small_draw() {
    let out = bin().args(["regress-table1", "--vectors", "10", "--seed", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn simulate_coupled_reports_clean_monitors_for_attractive_rates() {
    let out = bin()
        .args(["simulate-coupled", "--config"])
        .arg(fixture("sep_asym.toml"))
        .args(["--L", "40", "--T", "3", "--rho-low", "0.2", "--rho-high", "0.6"])
        .args(["--seed", "11", "--replicas", "2", "--block", "10", "--stability"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("all monitors clean"));
    let text = stdout(&out);
    assert!(text.contains("# columns: replica,x,xi,zeta"));
}

#[test]
fn hydro_riemann_writes_csv_and_svg_artifacts() {
    let dir = scratch("hydro");
    let csv_path = dir.join("riemann.csv");
    let svg_path = dir.join("riemann.svg");
    let out = bin()
        .args(["hydro-riemann", "--config"])
        .arg(fixture("stp.toml"))
        .args(["--lambda", "2", "--rho", "0", "--N", "40", "--t", "0.5"])
        .args(["--replicas", "1", "--seed", "5", "--out"])
        .arg(&csv_path)
        .arg("--svg")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("shock at speed 3"));

    let csv = fs::read_to_string(&csv_path).unwrap();
    assert!(csv.contains("# columns: xi,u_entropy,u_empirical"));
    assert!(csv.lines().filter(|l| !l.starts_with('#')).count() > 10);

    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<!--"), "plot must lead with its provenance header");
    assert!(svg.contains("<svg "));
    assert!(svg.contains("polyline"));
    let refs = svg.matches("http").count();
    assert_eq!(refs, 1, "the xmlns is the only URL allowed in the plot");
}

#[test]
fn flux_table_tabulates_closed_and_measured_columns() {
    let out = bin()
        .args(["flux-table", "--config"])
        .arg(fixture("thermal.toml"))
        .args(["--lo", "-0.6", "--hi", "0.6", "--points", "5", "--samples", "2000", "--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# columns: rho,g_closed,g_measured,stderr"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn unknown_subcommands_are_rejected() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_color_suppresses_ansi_sequences() {
    let out = bin()
        .args(["check-attractive", "--config"])
        .arg(fixture("stp.toml"))
        .env("NO_COLOR", "1")
        .output()
        .unwrap();
    assert!(!stdout(&out).contains('\x1b'), "NO_COLOR output must be plain");
}
