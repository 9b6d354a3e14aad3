//! End-to-end checks of the command-line contract: exit codes, flag
//! precedence, output values.

use std::path::Path;
use std::process::{Command, Output};

fn layerfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerfold"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).expect("csv exists");
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn empty_config_exits_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let result = layerfold(&["solve-single", "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&result.stderr);
    for key in ["`B`", "`q`", "`m`"] {
        assert!(stderr.contains(key), "stderr misses {key}: {stderr}");
    }
    assert!(!out.exists(), "config error must not create outputs");
}

#[test]
fn friction_out_of_range_cites_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let result = layerfold(&[
        "kinkband-maxwell",
        "--b",
        "1",
        "--t",
        "0.01",
        "--n_layers",
        "100",
        "--k",
        "1",
        "--q",
        "1",
        "--mu",
        "3.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("(0, 2]"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let result = layerfold(&[
        "solve-single",
        "--B",
        "1",
        "--q",
        "1",
        "--m",
        "1",
        "--wat",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("wat"));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"B": 1.0, "q": 1.0, "m": 1.0, "mode": "linearized"}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = layerfold(&[
        "solve-single",
        "--config",
        cfg.to_str().unwrap(),
        "--q",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["q"].as_f64(), Some(2.0));
    // the solve really used q = 2: L scales by 2^{-1/3}
    let rows = csv_rows(&out.join("summary.csv"));
    let void: f64 = rows[0][3].parse().unwrap();
    let expected = 2.0 * (3.0_f64 / 2.0).cbrt();
    assert!(
        (void - expected).abs() / expected < 0.01,
        "void {void} vs {expected}"
    );
}

#[test]
fn solve_single_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = layerfold(&[
        "solve-single",
        "--B",
        "1",
        "--q",
        "1",
        "--m",
        "1",
        "--mode",
        "linearized",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let rows = csv_rows(&out.join("summary.csv"));
    let void: f64 = rows[0][3].parse().unwrap();
    let expected = 2.0 * 3.0_f64.cbrt();
    assert!(
        (void - expected).abs() / expected < 0.01,
        "void length {void} vs 2·3^(1/3) = {expected}"
    );
    assert_eq!(rows[0][6], "true");
    // the nodal file has one row per grid node
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let n = manifest["config"]["n_nodes"].as_u64().unwrap() as usize;
    assert_eq!(csv_rows(&out.join("solution.csv")).len(), n);
}

#[test]
fn sweep_scaling_default_recovers_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = layerfold(&[
        "sweep-scaling",
        "--B",
        "1",
        "--m",
        "0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let sweep = csv_rows(&out.join("sweep.csv"));
    assert_eq!(sweep.len(), 9);
    let fit = csv_rows(&out.join("fit.csv"));
    let exponent: f64 = fit[0][0].parse().unwrap();
    assert!(
        (exponent + 1.0 / 3.0).abs() <= 0.03,
        "exponent {exponent} misses -1/3"
    );
}

#[test]
fn multilayer_census_has_one_row_per_interface() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = layerfold(&[
        "multilayer-solve",
        "--layers",
        "3",
        "--B",
        "1",
        "--t",
        "0.02",
        "--q",
        "1",
        "--m",
        "0.5",
        "--n_nodes",
        "201",
        "--mode",
        "linearized",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let census = csv_rows(&out.join("census.csv"));
    assert_eq!(census.len(), 3);
    for (i, row) in census.iter().enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
    }
    let stack = csv_rows(&out.join("stack.csv"));
    assert_eq!(stack.len(), 3 * 201);
}

#[test]
fn packet_optimum_is_interior_for_balanced_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = layerfold(&[
        "packet-optimum",
        "--c_void",
        "1",
        "--c_bend",
        "0.01",
        "--B",
        "1",
        "--q",
        "1",
        "--m",
        "1",
        "--n_max",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let best = csv_rows(&out.join("packet_optimum.csv"));
    let n_star: usize = best[0][0].parse().unwrap();
    assert!(n_star > 1 && n_star < 100, "n* = {n_star}");
    assert_eq!(best[0][2], "true");
    assert_eq!(csv_rows(&out.join("packet_scan.csv")).len(), 100);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let result = layerfold(&["fold-everything", "--out", "/tmp/x"]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("usage:"));
}

#[test]
fn alpha_range_is_cross_checked() {
    let dir = tempfile::tempdir().unwrap();
    let result = layerfold(&[
        "kinkband-path",
        "--b",
        "1",
        "--t",
        "0.01",
        "--n_layers",
        "100",
        "--k",
        "1",
        "--q",
        "1",
        "--mu",
        "0.57",
        "--alpha_min",
        "1.0",
        "--alpha_max",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("alpha_min"));
}
