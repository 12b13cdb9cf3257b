//! Behaviour of the `mcf` binary: outputs, exit codes and reproducibility.

use std::f64::consts::PI;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn mcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcf"))
        .args(args)
        .output()
        .expect("mcf binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn help_lists_every_registered_algorithm() {
    let o = mcf(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in mcf_core::algorithms::REGISTERED {
        assert!(text.contains(name), "{name} missing from --help");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["orbit", "--algo", "jacobi-perron"][..],
        &["mass", "--algo", "reverse", "--tol", "0"],
        &["hist", "--algo", "reverse", "--steps", "0"],
        &["frobnicate"],
    ] {
        let o = mcf(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numeric_failures_exit_with_one_and_a_category() {
    let o = mcf(&["mass", "--algo", "farey"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[infinite-mass]"));
    let o = mcf(&["audit", "--algo", "arp", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[unsupported]"));
    let o = mcf(&[
        "orbit", "--algo", "reverse", "--mode", "exact", "--x", "1", "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[dimension]"));
}

#[test]
fn exact_orbit_csv() {
    let o = mcf(&[
        "orbit", "--algo", "farey", "--mode", "exact", "--x", "2", "5", "--steps", "1",
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "n,branch,x1,x2,a1,a2\n0,1,2,5,1,1\n1,1,2,3,2,1\n"
    );
    let o = mcf(&[
        "orbit", "--algo", "reverse", "--mode", "exact", "--x", "1/2", "1/3", "1/5", "--steps", "3",
    ]);
    assert!(o.status.success());
    let rows: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0], "n,branch,x1,x2,x3,a1,a2,a3");
    assert_eq!(rows[2], "1,3,1/30,11/30,19/30,1,1,1");
}

#[test]
fn exact_orbit_stops_at_a_boundary() {
    let o = mcf(&[
        "orbit", "--algo", "farey", "--mode", "exact", "--x", "1", "1", "--steps", "4",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
    assert!(stderr(&o).contains("warning[boundary]"));
}

#[test]
fn float_orbit_is_reproducible() {
    let a = mcf(&["orbit", "--algo", "arp", "--steps", "500", "--seed", "4"]);
    let b = mcf(&[
        "--threads",
        "2",
        "orbit",
        "--algo",
        "arp",
        "--steps",
        "500",
        "--seed",
        "4",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 502);
    assert!(!text.contains('\r'));
}

#[test]
fn mass_matches_the_closed_value() {
    let o = mcf(&["mass", "--algo", "reverse", "--tol", "1e-6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - PI * PI / 4.0).abs() < 1e-6);
}

#[test]
fn dilog_report() {
    let o = mcf(&["dilog"]);
    assert!(o.status.success());
    let diff: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("abs_diff="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff < 1e-12);
}

#[test]
fn cassaigne_audit_has_no_violations() {
    let o = mcf(&[
        "audit",
        "--algo",
        "cassaigne",
        "--samples",
        "10000",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("piece,forward_samples,inverse_samples,ray_checks,violations\n"));
    assert!(stderr(&o).contains("0 violations"));
}

#[test]
fn parallel_outputs_equal_single_threaded_ones() {
    for args in [
        &[
            "density-check",
            "--algo",
            "brun",
            "--points",
            "200",
            "--seed",
            "2",
        ][..],
        &[
            "hist",
            "--algo",
            "cassaigne",
            "--steps",
            "100000",
            "--bins",
            "8",
            "--seed",
            "2",
        ],
        &[
            "brun-d",
            "--dim",
            "4",
            "--points",
            "5",
            "--mc-samples",
            "100000",
        ],
    ] {
        let one = mcf(&[&["--threads", "1"][..], args].concat());
        let three = mcf(&[&["--threads", "3"][..], args].concat());
        assert!(one.status.success(), "{args:?}: {}", stderr(&one));
        assert_eq!(one.stdout, three.stdout, "{args:?}");
    }
}

#[test]
fn fractal_golden_hash_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("arp.ppm");
    let args = [
        "fractal", "--algo", "arp", "--steps", "50000", "--res", "128", "--seed", "3", "--png",
        "--out",
    ];
    let o = mcf(&[&args[..], &[out.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&out).unwrap();
    assert!(bytes.starts_with(b"P6\n128 128\n255\n"));
    assert_eq!(
        sha256(&bytes),
        "289647e575da3bb5995d7db2d68fb543c43e53ff769afa3f0d64b8fc6fe41171"
    );
    assert!(out.with_extension("png").exists());
    let o = mcf(&["symmetry", out.to_str().unwrap(), "--algo", "arp"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("colored_jaccard="));
    let o = mcf(&[
        "symmetry",
        out.to_str().unwrap(),
        "--window",
        "0",
        "1",
        "0",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[unsupported]"));
}

#[test]
fn fractal_outside_the_simplex_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("far.ppm");
    let o = mcf(&[
        "fractal",
        "--algo",
        "arp",
        "--steps",
        "1000",
        "--res",
        "16",
        "--window",
        "4",
        "5",
        "4",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    assert!(stdout(&o).contains("occupancy=0.000000"));
}

#[test]
fn panels_image() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("panels.ppm");
    let o = mcf(&[
        "panels",
        "--algo",
        "brun",
        "--steps",
        "2000",
        "--res",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read(&out)
        .unwrap()
        .starts_with(b"P6\n129 129\n255\n"));
}
