//! Exit codes and output of the `irsfso` binary.

use std::path::Path;
use std::process::{Command, Output};

fn irsfso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsfso")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn regimes_writes_a_versioned_table() {
    let out = irsfso(&["regimes"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# irs-fso regimes v1"));
    assert!(lines.next().unwrap().contains("d_f_m"));
    // Three protocols, two pairs each.
    assert_eq!(lines.count(), 6);
}

#[test]
fn regime_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = irsfso(&["validate", "--suite", "regimes", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert!(json["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(String::from_utf8_lossy(&out.stderr).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let negative = write(dir.path(), "neg.toml", "[nodes]\nlens_radius_m = -0.15\n");
    let unknown = write(dir.path(), "typo.toml", "[beam]\nwavelenght_nm = 1550\n");
    for args in [
        vec!["--config", negative.as_str(), "regimes"],
        vec!["--config", unknown.as_str(), "regimes"],
        vec!["--config", "/nonexistent/scenario.toml", "regimes"],
        vec!["--oracle", "spherical", "regimes"],
    ] {
        let out = irsfso(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = irsfso(&["--config", negative.as_str(), "regimes"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nodes.lens_radius_m"));
}

#[test]
fn failed_validation_exits_with_one() {
    // The square-lens closed form misses the circular-lens quadrature by more
    // than 1e-3 for the 0.5 m reference tile.
    let out = irsfso(&["validate", "--suite", "gml"]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["passed"], false);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("FAIL [gml] square-lens")));
    assert!(stderr.lines().any(|l| l.starts_with("PASS [gml] far-field beam vs closed form")));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ber.toml",
        "[sweep]\nvariable = \"snr_db\"\nstart = 40\nstop = 60\nsteps = 3\n",
    );
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = irsfso(&["--config", &cfg, "--protocol", "td", "--profile", "lp", "--trials", "20000", "--seed", "5", "ber", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# irs-fso ber v1\n"));
    // Cases at delta 0 and 1 mrad, three points each, two receivers.
    assert_eq!(text.lines().count(), 2 + 2 * 3 * 2);
}
