//! Feasible-region construction and deterministic envelopes.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdoe_core::lintopf::*;

/// Largest relative gap between `vec(E)' H_i w` and the direct product
/// `[F D^-1 E C^-1]_i w` over random `w`.
fn kron_identity_gap(fr: &FeasibleRegion, vectors: usize, seed: u64) -> f64 {
    let ls = &fr.system;
    let direct: DMatrix<f64> = &ls.f * &ls.d_inv * &ls.e * &ls.c_inv;
    let ve = fr.vec_e();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..vectors {
        let w = DVector::from_fn(fr.dim(), |_, _| rng.random_range(-1.0..1.0));
        let rhs = &direct * &w;
        for i in 0..fr.num_rows() {
            let lhs = ve.dot(&fr.h_apply(i, &w));
            worst = worst.max((lhs - rhs[i]).abs() / (1.0 + rhs[i].abs()));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kronecker_rows_match_direct_product(buses in 3usize..12, seed in 0u64..1000) {
        let net = feeder(buses, seed);
        let fr = region(&net);
        prop_assert!(kron_identity_gap(&fr, 10, seed) <= 1e-9);
    }

    #[test]
    fn connectivity_matrices_are_unimodular(buses in 2usize..15, seed in 0u64..1000) {
        let ls = region(&feeder(buses, seed)).system;
        prop_assert!((ls.c.determinant().abs() - 1.0).abs() < 1e-9);
        prop_assert!((ls.d.determinant().abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn region_rows_match_the_linear_state(buses in 2usize..10, seed in 0u64..1000, scale in 0.0f64..3.0) {
        let net = feeder(buses, seed);
        let fr = region(&net);
        let ls = &fr.system;
        let na = ls.n_active();
        let p1 = DVector::from_element(na, -scale);
        let q1 = DVector::zeros(na);
        let w = fr.w_of(&p1, &q1);
        let (v, _) = ls.state(&w);
        let direct = &ls.f * v - &ls.f_vec;
        let via_region = &fr.r * &w - &fr.t;
        prop_assert!((direct - via_region).amax() < 1e-9);
    }
}

#[test]
fn dense_kronecker_matches_implicit_product() {
    let fr = region(&feeder(4, 9));
    let w = DVector::from_fn(fr.dim(), |i, _| (i as f64 * 0.37).cos());
    for i in [0, fr.num_rows() / 2, fr.num_rows() - 1] {
        assert!((fr.h_dense(i) * &w - fr.h_apply(i, &w)).amax() < 1e-12);
    }
}

/// Most export along the equal-allocation ray by bisection on membership.
fn equal_ray_oracle(fr: &FeasibleRegion) -> f64 {
    let na = fr.system.n_active();
    let q1 = fr.system.q1_fixed.clone();
    let ok = |p: f64| fr.contains(&DVector::from_element(na, p), &q1, 0.0);
    let (mut lo, mut hi) = (-7.0, 0.0);
    if ok(lo) {
        return lo * na as f64;
    }
    assert!(ok(hi));
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi * na as f64
}

#[test]
fn twobus_ddoe_matches_membership_search() {
    let fr = region(&twobus());
    let res = solve_ddoe(&fr, &EnvelopeOptions::default()).unwrap();
    let expected = equal_ray_oracle(&fr);
    let got = res.objective_kw.unwrap();
    assert!((got - expected).abs() <= 0.005 * expected.abs(), "{got} vs {expected}");
    let p = res.p1();
    assert!((p[0] - p[1]).abs() < 1e-7);
}

#[test]
fn independent_allocation_matches_grid_search() {
    let fr = region(&twobus());
    let opts = EnvelopeOptions {
        allocation: AllocationPolicy::Independent,
        ..EnvelopeOptions::default()
    };
    let res = solve_ddoe(&fr, &opts).unwrap();
    let q1 = fr.system.q1_fixed.clone();
    let mut best = f64::INFINITY;
    let steps = 280;
    for i in 0..=steps {
        for j in 0..=steps {
            let pa = -7.0 + 14.0 * i as f64 / steps as f64;
            let pb = -7.0 + 14.0 * j as f64 / steps as f64;
            if pa + pb < best && fr.contains(&dv(&[pa, pb]), &q1, 0.0) {
                best = pa + pb;
            }
        }
    }
    let got = res.objective_kw.unwrap();
    // The grid optimum is never better than the LP and within one cell of it.
    assert!(got <= best + 1e-9);
    assert!((got - best).abs() <= 0.005 * best.abs(), "{got} vs {best}");
}

#[test]
fn reactive_freedom_never_hurts() {
    let fr = region(&twobus());
    let obj = |q_control| {
        let opts = EnvelopeOptions {
            q_control,
            ..EnvelopeOptions::default()
        };
        solve_ddoe(&fr, &opts).unwrap().objective_kw.unwrap()
    };
    let fixed = obj(QControl::Fixed);
    let active = obj(QControl::Active);
    let all = obj(QControl::All);
    assert!(active <= fixed + 1e-7);
    assert!(all <= active + 1e-7);
    assert!(active < fixed - 0.5, "reactive support should matter on this feeder");
}

#[test]
fn import_envelope_is_symmetric_in_sign() {
    let fr = region(&twobus());
    let opts = EnvelopeOptions {
        direction: Direction::Import,
        ..EnvelopeOptions::default()
    };
    let res = solve_ddoe(&fr, &opts).unwrap();
    assert!(res.objective_kw.unwrap() > 0.0);
    assert!(fr.contains(&res.p1(), &res.q1(), 1e-7));
}

#[test]
fn well_known_infeasible_point_is_rejected() {
    let fr = region(&twobus());
    let q1 = fr.system.q1_fixed.clone();
    assert!(!fr.contains(&dv(&[-20.0, -20.0]), &q1, 0.0));
    assert!(fr.contains(&dv(&[0.0, 0.0]), &q1, 0.0));
}

#[test]
fn traced_polygon_is_convex_and_on_the_boundary() {
    let fr = region(&twobus());
    let poly = trace_fr_2d(&fr, &EnvelopeOptions::default(), 72).unwrap();
    assert_eq!(poly.points.len(), 72);
    assert!(poly.is_convex(1e-6));
    let q1 = fr.system.q1_fixed.clone();
    for b in &poly.points {
        let p = dv(&[b.p_a_kw, b.p_b_kw]);
        assert!(fr.contains(&p, &q1, 1e-6));
        // Pushing outward along the sweep direction leaves the region.
        let th = b.angle_deg.to_radians();
        let out = &p + dv(&[th.cos(), th.sin()]) * 1e-3;
        let in_box = out.iter().all(|x| x.abs() <= 7.0);
        assert!(!(in_box && fr.contains(&out, &q1, 0.0)));
    }
}

#[test]
fn polygon_agrees_with_membership_grid() {
    let fr = region(&twobus());
    let poly = trace_fr_2d(&fr, &EnvelopeOptions::default(), 180).unwrap();
    // Neighbouring directions often return the same vertex; near-duplicates
    // would make the edge test below meaningless.
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for b in &poly.points {
        let p = (b.p_a_kw, b.p_b_kw);
        if pts.last().is_none_or(|q: &(f64, f64)| (p.0 - q.0).hypot(p.1 - q.1) > 1e-6) {
            pts.push(p);
        }
    }
    if (pts[0].0 - pts[pts.len() - 1].0).hypot(pts[0].1 - pts[pts.len() - 1].1) <= 1e-6 {
        pts.pop();
    }
    let inside = |x: f64, y: f64| {
        // Counter-clockwise vertex order from the sweep.
        pts.iter().zip(pts.iter().cycle().skip(1)).all(|(a, b)| {
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= -1e-9
        })
    };
    let q1 = fr.system.q1_fixed.clone();
    let mut mismatches = 0;
    let mut total = 0;
    for i in 0..=40 {
        for j in 0..=40 {
            let (x, y) = (-6.9 + 0.345 * i as f64, -6.9 + 0.345 * j as f64);
            total += 1;
            if inside(x, y) != fr.contains(&dv(&[x, y]), &q1, 0.0) {
                mismatches += 1;
            }
        }
    }
    // Only points within the sweep's chord error of the boundary may disagree.
    assert!(mismatches * 100 <= total, "{mismatches}/{total}");
}

#[test]
fn negligible_impedance_gives_the_box() {
    let mut net = twobus();
    for row in net.lines[0].z.iter_mut() {
        for cell in row.iter_mut() {
            cell[0] *= 1e-6;
            cell[1] *= 1e-6;
        }
    }
    net.validate().unwrap();
    let fr = region(&net);
    let poly = trace_fr_2d(&fr, &EnvelopeOptions::default(), 8).unwrap();
    for b in &poly.points {
        assert!(b.p_a_kw.abs() <= 7.0 + 1e-6 && b.p_b_kw.abs() <= 7.0 + 1e-6);
    }
    let corners = poly.points.iter().filter(|b| (b.p_a_kw.abs() - 7.0).abs() < 1e-5 && (b.p_b_kw.abs() - 7.0).abs() < 1e-5).count();
    assert!(corners >= 4);
}

#[test]
fn region_csv_has_one_row_per_constraint() {
    let fr = region(&twobus());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fr.csv");
    fr.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), fr.num_rows() + 1);
    let m = fr.dim();
    assert_eq!(lines[1].split(',').count(), m * m * m + 2);
}
