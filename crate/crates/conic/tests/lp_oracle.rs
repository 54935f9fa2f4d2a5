//! Random bounded LPs checked against brute-force vertex enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdoe_conic::{solve, ConicProgram, LinExpr, SolveOptions, SolveStatus};

/// maximize c'x s.t. G x <= h, with the optimum attained at a vertex in 2-D.
struct Lp2 {
    c: [f64; 2],
    g: Vec<[f64; 2]>,
    h: Vec<f64>,
}

fn vertex_optimum(lp: &Lp2) -> Option<f64> {
    let m = lp.g.len();
    let mut best: Option<f64> = None;
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (lp.g[i], lp.g[j]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (lp.h[i] * b[1] - a[1] * lp.h[j]) / det;
            let y = (a[0] * lp.h[j] - lp.h[i] * b[0]) / det;
            let feasible = lp
                .g
                .iter()
                .zip(&lp.h)
                .all(|(g, h)| g[0] * x + g[1] * y <= h + 1e-9);
            if feasible {
                let v = lp.c[0] * x + lp.c[1] * y;
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng, extra: usize) -> Lp2 {
    // Directions spread around the circle keep the region bounded.
    let m = 3 + extra;
    let offset: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let mut g = Vec::new();
    let mut h = Vec::new();
    for k in 0..m {
        let ang = offset + std::f64::consts::TAU * (k as f64 + 0.3 * rng.random::<f64>()) / m as f64;
        g.push([ang.cos(), ang.sin()]);
        h.push(0.5 + 2.0 * rng.random::<f64>());
    }
    Lp2 {
        c: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        g,
        h,
    }
}

fn build(lp: &Lp2) -> (ConicProgram, [usize; 2]) {
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    let y = p.add_var("y");
    p.add_objective(&(LinExpr::term(x, lp.c[0]) + LinExpr::term(y, lp.c[1])));
    for (g, h) in lp.g.iter().zip(&lp.h) {
        p.add_le(&(LinExpr::term(x, g[0]) + LinExpr::term(y, g[1])), *h);
    }
    (p, [x, y])
}

#[test]
fn random_2d_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let lp = random_lp(&mut rng, trial % 8);
        let expected = vertex_optimum(&lp).expect("bounded nonempty region");
        let (prog, _) = build(&lp);
        let rep = solve(&prog, &SolveOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal, "trial {trial}: {}", rep.message);
        assert!(
            (rep.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()),
            "trial {trial}: {} vs {}",
            rep.objective,
            expected
        );
        assert!(prog.eq_residual(&rep.x) < 1e-7);
        assert!(prog.cone_violation(&rep.x) < 1e-7);
    }
}

#[test]
fn presolve_does_not_change_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let lp = random_lp(&mut rng, 4);
        let (prog, _) = build(&lp);
        let on = solve(&prog, &SolveOptions::default()).unwrap();
        let off = solve(
            &prog,
            &SolveOptions {
                presolve: false,
                equilibrate: false,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(on.status, SolveStatus::Optimal);
        assert_eq!(off.status, SolveStatus::Optimal, "trial {trial}: {}", off.message);
        assert!((on.objective - off.objective).abs() < 1e-6);
    }
}

#[test]
fn infeasible_and_unbounded_are_detected() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.add_le(&LinExpr::var(x), -1.0);
    p.add_ge(&LinExpr::var(x), 1.0);
    let rep = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Infeasible, "{}", rep.message);

    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    let y = p.add_var("y");
    p.add_objective(&(LinExpr::var(x) + LinExpr::var(y)));
    p.add_le(&(LinExpr::var(x) - LinExpr::var(y)), 1.0);
    p.add_ge(&LinExpr::var(y), 0.0);
    let rep = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Unbounded, "{}", rep.message);
}

#[test]
fn inconsistent_equalities_are_infeasible() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    p.add_eq(&LinExpr::var(x), 1.0);
    p.add_eq(&LinExpr::var(x), 2.0);
    assert_eq!(solve(&p, &SolveOptions::default()).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn degenerate_lp_with_free_and_fixed_variables() {
    // max x + 2y  s.t. x + y = 1, 0 <= x <= 1, y free but y <= 0.25, t fixed at 3
    let mut p = ConicProgram::new();
    let x = p.add_var("x");
    let y = p.add_var("y");
    let t = p.add_var("t");
    p.add_objective(&(LinExpr::var(x) + LinExpr::term(y, 2.0) + LinExpr::var(t)));
    p.add_eq(&(LinExpr::var(x) + LinExpr::var(y)), 1.0);
    p.add_bounds(x, 0.0, 1.0);
    p.add_le(&LinExpr::var(y), 0.25);
    p.add_bounds(t, 3.0, 3.0);
    let rep = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.objective - (0.75 + 0.5 + 3.0)).abs() < 1e-7);
    assert!((rep.x[y] - 0.25).abs() < 1e-7);
}
