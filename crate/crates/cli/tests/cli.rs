use std::path::Path;
use std::process::{Command, Output};

use ctraj::eigenstate::Eigenstate;
use ctraj::probability::born_density;
use ctraj::report::Report;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctraj")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Manifest and rows of a CSV output.
fn csv(text: &str) -> (serde_json::Value, Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let manifest = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").expect("manifest line")).unwrap();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (manifest, header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn reports(text: &str) -> Vec<Report> {
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    assert!(v["manifest"].is_object());
    serde_json::from_value(v["reports"].clone()).unwrap()
}

#[test]
fn trace_levels_gives_one_block_per_level() {
    let o = run(&["trace", "--n", "1", "--levels", "0.2,0.5,1.0,1.5,3"]);
    assert_eq!(code(&o), 0);
    let (manifest, header, rows) = csv(&stdout(&o));
    assert_eq!(manifest["subcommand"], "trace");
    assert_eq!(header, ["block", "segment", "orbit", "t", "X_r", "X_i", "invariant_level"]);
    let (b, inv) = (col(&header, "block"), col(&header, "invariant_level"));
    let mut blocks: Vec<&str> = rows.iter().map(|r| r[b].as_str()).collect();
    blocks.dedup();
    assert_eq!(blocks, ["0", "1", "2", "3", "4"]);
    for (block, level) in [("0", 0.2), ("1", 0.5), ("3", 1.5), ("4", 3.0)] {
        for r in rows.iter().filter(|r| r[b] == block) {
            let a: f64 = r[inv].parse().unwrap();
            assert!((a / level - 1.0).abs() < 1e-6, "block {block}: {a}");
        }
    }
    // Below the separatrix each level is two ovals, above it one.
    let segments = |block: &str| rows.iter().filter(|r| r[b] == block).map(|r| r[1].clone()).collect::<std::collections::BTreeSet<_>>().len();
    assert_eq!(segments("0"), 2);
    assert_eq!(segments("4"), 1);
}

#[test]
fn separatrix_of_second_state_has_three_lobes() {
    let o = run(&["trace", "--n", "2", "--levels", "separatrix"]);
    assert_eq!(code(&o), 0);
    let (_, header, rows) = csv(&stdout(&o));
    let (xr, xi) = (col(&header, "X_r"), col(&header, "X_i"));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[xr].parse().unwrap(), r[xi].parse().unwrap())).collect();
    let top = |lo: f64, hi: f64| pts.iter().filter(|p| p.0 > lo && p.0 < hi).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (left, centre, right) = (top(-3.0, -0.71), top(-0.70, 0.70), top(0.71, 3.0));
    assert!(left > 0.42 && right > 0.42, "{left} {right}");
    assert!(centre > 0.39 && centre < 0.41, "{centre}");
}

#[test]
fn pole_start_is_a_numerical_failure() {
    let o = run(&["trace", "--n", "1", "--start", "0,0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(0.0, 0.0)"));
}

#[test]
fn trace_start_accepts_negative_coordinates() {
    let o = run(&["trace", "--n", "1", "--start", "-1.5,0.2", "--start", "0.5,-0.1"]);
    assert_eq!(code(&o), 0);
    let (_, _, rows) = csv(&stdout(&o));
    assert!(rows.iter().any(|r| r[0] == "1"));
}

#[test]
fn density_grid_row_count() {
    let o = run(&["density", "--n", "1", "--method", "wyatt", "--grid", "-2:2:200,-1:1:100"]);
    assert_eq!(code(&o), 0);
    let (manifest, header, rows) = csv(&stdout(&o));
    assert_eq!(rows.len(), 20000);
    assert_eq!(header, ["X_r", "X_i", "value", "method", "region", "masked"]);
    assert_eq!(manifest["grid"], "-2:2:200,-1:1:100");
}

#[test]
fn combined_density_on_axis_is_born() {
    let o = run(&["density", "--n", "1", "--method", "combined", "--grid", "-3:3:61,-1:1:21"]);
    assert_eq!(code(&o), 0);
    let (_, _, rows) = csv(&stdout(&o));
    let s = Eigenstate::natural(1).unwrap();
    let mut checked = 0;
    for r in rows.iter().filter(|r| r[1].parse::<f64>().unwrap() == 0.0 && r[5] == "0") {
        let x: f64 = r[0].parse().unwrap();
        let v: f64 = r[2].parse().unwrap();
        assert!((v / born_density(&s, x) - 1.0).abs() < 1e-12, "x = {x}");
        checked += 1;
    }
    assert_eq!(checked, 60);
}

#[test]
fn masked_cells_are_flagged() {
    let o = run(&["density", "--n", "1", "--method", "conserved", "--grid", "-1:1:3,-1:1:3"]);
    assert_eq!(code(&o), 0);
    let (_, _, rows) = csv(&stdout(&o));
    let centre = rows.iter().find(|r| r[0] == "0.0" && r[1] == "0.0").unwrap();
    assert_eq!(centre[2], "");
    assert_eq!(centre[5], "1");
    assert!(rows.iter().filter(|r| r[5] == "0").all(|r| r[2].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn source_quadrant_signs() {
    let o = run(&["density", "--n", "1", "--method", "source", "--grid", "-0.8:0.8:9,-0.4:0.4:9"]);
    let (_, _, rows) = csv(&stdout(&o));
    for r in rows.iter().filter(|r| r[5] == "0") {
        let (x, y, v): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(v * x * y >= 0.0, "({x}, {y}) -> {v}");
        if x * y != 0.0 {
            assert!(v != 0.0);
        }
    }
}

#[test]
fn born_table() {
    let o = run(&["born", "--n", "2", "--grid", "-4:4:401"]);
    assert_eq!(code(&o), 0);
    let (_, header, rows) = csv(&stdout(&o));
    assert_eq!(header, ["x_r", "P_integral", "P_closed_form", "rel_error", "masked"]);
    assert_eq!(rows.len(), 401);
    for r in rows.iter().filter(|r| r[4] == "0") {
        assert!(r[3].parse::<f64>().unwrap() < 1e-6);
    }
}

#[test]
fn fraction_report_carries_masses() {
    let o = run(&["fraction", "--n", "1"]);
    assert_eq!(code(&o), 0);
    let r = &reports(&stdout(&o))[0];
    assert!((r.computed_value - 0.4325).abs() < 0.01);
    let m_in = r.grid_metadata["m_in"].as_f64().unwrap();
    let m_total = r.grid_metadata["m_total"].as_f64().unwrap();
    assert!((m_in / m_total - r.computed_value).abs() < 1e-15);
    assert_eq!(r.pass, r.evaluate());
}

#[test]
fn width_report_is_judged_against_the_published_value() {
    let o = run(&["width", "--n", "2"]);
    assert_eq!(code(&o), 0);
    let r = &reports(&stdout(&o))[0];
    assert_eq!(r.paper_value, Some(0.4125));
    assert_eq!(r.reference_value, Some(0.4125));
    assert_eq!(r.tolerance, 5e-4);
    assert_eq!(r.pass, r.evaluate());
}

#[test]
fn classical_width_in_metres() {
    let o = run(&["classical", "--n", "1", "--si", "--mass", "9.1093837015e-31", "--omega", "4"]);
    assert_eq!(code(&o), 0);
    let r = &reports(&stdout(&o))[0];
    let ratio = r.computed_value / (0.01 / 2.0);
    assert!(ratio.max(1.0 / ratio) < 3.0, "{}", r.computed_value);
    assert!(r.pass);
}

#[test]
fn verify_quick_passes_and_rereads_its_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verify.json");
    let o = run(&["verify", "--n", "1", "--quick", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let rs = reports(&text);
    assert!(rs.len() >= 10);
    assert!(rs.iter().all(Report::evaluate));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), rs.len());
}

#[test]
fn verify_reports_failures_with_exit_three() {
    let o = run(&["verify", "--n", "2", "--quick"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["density", "--grid", "1:2"][..],
        &["bogus"],
        &["classical", "--mass", "2"],
        &["trace", "--n", "1"],
        &["trace", "--n", "11", "--levels", "1"],
        &["fraction", "--n", "0"],
        &["trace", "--levels", "abc"],
        &["born", "--tol", "-1"],
        &["trace", "--tol", "-1", "--levels", "1"],
    ] {
        assert_eq!(code(&run(args)), 1, "{args:?}");
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let p = dir.path().join(name);
        let o = run(&["density", "--n", "2", "--method", "combined", "--grid", "-2:2:21,-1:1:11", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        std::fs::read(&p).unwrap()
    };
    let (a, b) = (go("a.csv"), go("a.csv"));
    assert_eq!(a, b);
    assert!(Path::new(&dir.path().join("a.csv")).exists());
}
