//! End-to-end runs of the `rdoe` binary.

use rdoe_core::lintopf::{assemble, FeasibleRegion, OperatingPoint};
use rdoe_core::netmodel::NetworkModel;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rdoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdoe")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = rdoe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn objective(out: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    v["objective_kw"].as_f64().unwrap()
}

fn read_points(path: &Path, region: &str) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.split(',').next() == Some(region))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

fn write_network(dir: &Path, name: &str, edit: impl FnOnce(&mut NetworkModel)) -> PathBuf {
    let mut net = NetworkModel::bundled("twobus").unwrap();
    edit(&mut net);
    let path = dir.join(name);
    std::fs::write(&path, net.to_json()).unwrap();
    path
}

#[test]
fn ddoe_writes_result_files() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["ddoe", "--out", dir_arg(tmp.path())]);
    assert!(stdout.contains("objective_kw:"));
    assert!(stdout.contains("setup"));
    for f in ["result.json", "envelopes.csv", "timing.csv"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("envelopes.csv")).unwrap();
    assert!(csv.starts_with("customer,kind,p_kw,q_kvar\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(objective(tmp.path()) < 0.0);
}

#[test]
fn zero_radius_matches_deterministic_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let r = tmp.path().join("r");
    run_ok(&["ddoe", "--out", dir_arg(&d)]);
    run_ok(&["rdoe", "--mode", "impedance", "--radius", "0", "--out", dir_arg(&r)]);
    assert_eq!(
        std::fs::read(d.join("envelopes.csv")).unwrap(),
        std::fs::read(r.join("envelopes.csv")).unwrap()
    );
}

#[test]
fn bilinear_is_at_least_as_conservative_as_each_source() {
    let tmp = tempfile::tempdir().unwrap();
    let mut objs = Vec::new();
    for mode in ["impedance", "demand", "bilinear"] {
        let d = tmp.path().join(mode);
        run_ok(&["rdoe", "--mode", mode, "--out", dir_arg(&d)]);
        objs.push(objective(&d));
    }
    // Less export means a larger (less negative) total.
    assert!(objs[2] >= objs[0] - 1e-6 && objs[2] >= objs[1] - 1e-6, "{objs:?}");
}

#[test]
fn repeated_runs_give_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        run_ok(&["rdoe", "--mode", "bilinear", "--samples", "500", "--seed", "7", "--out", dir_arg(d)]);
    }
    for f in ["result.json", "envelopes.csv", "robustness.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn robust_polygon_lies_inside_the_deterministic_region() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["fr-trace", "--directions", "36", "--out", dir_arg(tmp.path())]);
    let path = tmp.path().join("fr_trace.csv");
    let robust = read_points(&path, "robust");
    assert_eq!(robust.len(), 36);
    assert_eq!(read_points(&path, "deterministic").len(), 36);
    assert_eq!(read_points(&path, "doe-robust").len(), 1);
    let net = NetworkModel::bundled("twobus").unwrap();
    let fr = FeasibleRegion::with_forecast(assemble(&net, &OperatingPoint::flat(&net)).unwrap(), &net).unwrap();
    let q1 = fr.system.q1_fixed.clone();
    for (a, b) in robust {
        assert!(fr.contains(&nalgebra_point(a, b), &q1, 1e-5), "({a}, {b})");
    }
}

fn nalgebra_point(a: f64, b: f64) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_vec(vec![a, b])
}

/// Signed distance of `p` outside a counter-clockwise polygon (negative inside).
fn outside_by(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &q in poly {
        if pts.last().is_none_or(|l: &(f64, f64)| (q.0 - l.0).hypot(q.1 - l.1) > 1e-6) {
            pts.push(q);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if len < 1e-9 {
            continue;
        }
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        worst = worst.max(-cross / len);
    }
    worst
}

#[test]
fn reactive_support_enlarges_the_region() {
    let tmp = tempfile::tempdir().unwrap();
    let fq = tmp.path().join("fq");
    let cq = tmp.path().join("cq");
    run_ok(&["fr-trace", "--mode", "det", "--directions", "180", "--out", dir_arg(&fq)]);
    run_ok(&["fr-trace", "--mode", "det", "--directions", "180", "--q-control", "active", "--out", dir_arg(&cq)]);
    let small = read_points(&fq.join("fr_trace.csv"), "deterministic");
    let big = read_points(&cq.join("fr_trace.csv"), "deterministic");
    // The traced polygon is an inner approximation; allow its chord error.
    for p in &small {
        assert!(outside_by(&big, *p) < 0.02, "{p:?}");
    }
    let area = |pts: &[(f64, f64)]| {
        0.5 * (0..pts.len())
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum::<f64>()
    };
    assert!(area(&big) > area(&small));
}

#[test]
fn negligible_impedance_traces_the_power_box() {
    let tmp = tempfile::tempdir().unwrap();
    let net = write_network(tmp.path(), "stiff.json", |n| {
        for row in n.lines[0].z.iter_mut() {
            for cell in row.iter_mut() {
                cell[0] *= 1e-6;
                cell[1] *= 1e-6;
            }
        }
    });
    run_ok(&["fr-trace", "--network", net.to_str().unwrap(), "--mode", "det", "--directions", "8", "--out", dir_arg(tmp.path())]);
    let pts = read_points(&tmp.path().join("fr_trace.csv"), "deterministic");
    for (a, b) in &pts {
        assert!(a.abs() <= 7.0 + 1e-5 && b.abs() <= 7.0 + 1e-5);
    }
    for corner in [(7.0, 7.0), (-7.0, 7.0), (-7.0, -7.0), (7.0, -7.0)] {
        assert!(pts.iter().any(|p| (p.0 - corner.0).abs() < 1e-4 && (p.1 - corner.1).abs() < 1e-4), "{corner:?}");
    }
}

#[test]
fn trace_needs_two_active_customers() {
    let tmp = tempfile::tempdir().unwrap();
    let net = write_network(tmp.path(), "three.json", |n| {
        n.customers[1].kind = rdoe_core::netmodel::CustomerKind::Active;
        n.customers[1].p_bounds = [-7.0, 7.0];
        n.customers[1].q_bounds = [-1.0, 1.0];
    });
    let out = rdoe(&["fr-trace", "--network", net.to_str().unwrap(), "--out", dir_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two active customers"));
}

#[test]
fn lin_error_has_four_rows() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["lin-error", "--refine", "--out", dir_arg(tmp.path())]);
    let csv = std::fs::read_to_string(tmp.path().join("lin_error.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let refined = std::fs::read_to_string(tmp.path().join("lin_error_refined.csv")).unwrap();
    assert_eq!(refined.lines().count(), 5);
}

#[test]
fn tsro_trace_ends_below_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["tsro", "--out", dir_arg(tmp.path())]);
    let trace = std::fs::read_to_string(tmp.path().join("tsro_trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    let violation: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(violation <= 1e-7);
    let rc = tmp.path().join("rc");
    run_ok(&["rdoe", "--mode", "impedance", "--out", dir_arg(&rc)]);
    let (a, b) = (objective(tmp.path()), objective(&rc));
    assert!((a - b).abs() <= 1e-4 * b.abs());
}

#[test]
fn bench_reports_medians_of_ten_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["bench", "--out", dir_arg(tmp.path())]);
    let csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert_eq!(r.split(',').nth(6), Some("10"));
    }
    let timing = std::fs::read_to_string(tmp.path().join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 1 + 10 * 10);
}

#[test]
fn audit_reports_nominal_and_sampled_voltages() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&["pf-audit", "--mode", "bilinear", "--samples", "50", "--out", dir_arg(tmp.path())]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("audit.json")).unwrap()).unwrap();
    assert_eq!(v["nominal"]["converged"], true);
    assert_eq!(v["sampled"]["samples"], 50);
    assert_eq!(v["sampled"]["not_converged"], 0);
}

#[test]
fn exit_codes_are_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = rdoe(&["ddoe", "--network", "/nonexistent/net.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(rdoe(&["rdoe", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(rdoe(&["rdoe", "--radius=-0.1"]).status.code(), Some(1));
    let tight = write_network(tmp.path(), "tight.json", |n| {
        n.buses[1].vmin = 1.2;
        n.buses[1].vmax = 1.3;
    });
    let out = rdoe(&["ddoe", "--network", tight.to_str().unwrap(), "--out", dir_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_tolerance_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rdoe"))
        .args(["ddoe", "--out", dir_arg(tmp.path())])
        .env("ENVELOPE_SOLVER_TOL", "1e-6")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!((objective(tmp.path()) + 9.163).abs() < 1e-2);
}
