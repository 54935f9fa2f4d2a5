//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector.

use crate::cones::ConeSet;
use crate::kkt::{Kkt, Scaling, SparseMat};
use crate::presolve::{Block, PresolveOutcome, SparseRow, Standard};
use crate::program::{ConicProgram, ProgramError};
use crate::report::{IterationLog, SolveOptions, SolveStatus, SolverReport};
use nalgebra::DVector;
use std::time::Instant;

const STEP_FRACTION: f64 = 0.99;
const EQUILIBRATION_PASSES: usize = 15;

/// Diagonal scalings: `x = d .* x~`, `y = ea .* y~`, `z = eg .* z~`, `s = s~ ./ eg`.
struct Equilibration {
    d: DVector<f64>,
    ea: DVector<f64>,
    eg: DVector<f64>,
}

struct Scaled {
    c: DVector<f64>,
    a: Vec<SparseRow>,
    b: DVector<f64>,
    g: Vec<SparseRow>,
    h: DVector<f64>,
}

fn equilibrate(st: &Standard, enabled: bool) -> (Scaled, Equilibration) {
    let (n, p, m) = (st.n, st.p(), st.m());
    let mut a = st.a.clone();
    let mut g = st.g.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut ea = DVector::from_element(p, 1.0);
    let mut eg = DVector::from_element(m, 1.0);
    let passes = if enabled { EQUILIBRATION_PASSES } else { 0 };
    for _ in 0..passes {
        let mut col = vec![0.0f64; n];
        for row in a.iter().chain(g.iter()) {
            for &(j, v) in row {
                col[j] = col[j].max(v.abs());
            }
        }
        let dc: Vec<f64> = col.iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        let ra: Vec<f64> = a
            .iter()
            .map(|r| {
                let mx = r.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
                if mx > 0.0 {
                    1.0 / mx.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut rg: Vec<f64> = g
            .iter()
            .map(|r| r.iter().fold(0.0f64, |m, t| m.max(t.1.abs())))
            .collect();
        for blk in &st.blocks {
            if let Block::Soc { start, len } = *blk {
                let mx = rg[start..start + len].iter().fold(0.0f64, |m, v| m.max(*v));
                rg[start..start + len].fill(mx);
            }
        }
        for v in &mut rg {
            *v = if *v > 0.0 { 1.0 / v.sqrt() } else { 1.0 };
        }
        for (i, row) in a.iter_mut().enumerate() {
            for t in row.iter_mut() {
                t.1 *= ra[i] * dc[t.0];
            }
            ea[i] *= ra[i];
        }
        for (i, row) in g.iter_mut().enumerate() {
            for t in row.iter_mut() {
                t.1 *= rg[i] * dc[t.0];
            }
            eg[i] *= rg[i];
        }
        for j in 0..n {
            d[j] *= dc[j];
        }
    }
    let scaled = Scaled {
        c: st.c.component_mul(&d),
        b: st.b.component_mul(&ea),
        h: st.h.component_mul(&eg),
        a,
        g,
    };
    (scaled, Equilibration { d, ea, eg })
}

struct Direction {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Metrics {
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    gap: f64,
    rel_gap: f64,
}

/// Solves `prog` (maximization) with the bundled interior-point method.
pub fn solve_ipm(prog: &ConicProgram, opts: &SolveOptions) -> Result<SolverReport, ProgramError> {
    prog.validate()?;
    let t0 = Instant::now();
    let nv = prog.num_vars();
    let (st, outcome) = Standard::build(prog, opts.presolve);
    if let PresolveOutcome::Inconsistent(row) = outcome {
        let mut rep = SolverReport::failed(
            SolveStatus::Infeasible,
            nv,
            format!("equality row {row} is inconsistent with the others"),
        );
        rep.wall_time = t0.elapsed();
        return Ok(rep);
    }
    let mut rep = run(&st, prog, opts);
    rep.wall_time = t0.elapsed();
    Ok(rep)
}

fn run(st: &Standard, prog: &ConicProgram, opts: &SolveOptions) -> SolverReport {
    let nv = prog.num_vars();
    let (n, p, m) = (st.n, st.p(), st.m());
    let cones = ConeSet::new(st.blocks.clone(), m);
    let (sc, eq) = equilibrate(st, opts.equilibrate);
    let a_mat = SparseMat { rows: &sc.a, ncols: n };
    let g_mat = SparseMat { rows: &sc.g, ncols: n };
    let a_orig = SparseMat { rows: &st.a, ncols: n };
    let g_orig = SparseMat { rows: &st.g, ncols: n };
    let nu = cones.degree() as f64;

    // Initial point from two least-squares problems.
    let Some(kkt0) = Kkt::factor(&sc.a, &sc.g, n, &st.blocks, Scaling::Identity) else {
        return SolverReport::failed(SolveStatus::NumericalFailure, nv, "initial factorization failed");
    };
    let zero_n = DVector::zeros(n);
    let zero_p = DVector::zeros(p);
    let zero_m = DVector::zeros(m);
    let (Some(primal0), Some(dual0)) = (
        kkt0.solve(&zero_n, &sc.b, &sc.h),
        kkt0.solve(&(-&sc.c), &zero_p, &zero_m),
    ) else {
        return SolverReport::failed(SolveStatus::NumericalFailure, nv, "initial solve failed");
    };
    drop(kkt0);
    let mut x = primal0.x;
    let mut s = -primal0.z;
    cones.push_inside(&mut s);
    let mut y = dual0.y;
    let mut z = dual0.z;
    cones.push_inside(&mut z);
    let mut tau: f64 = 1.0;
    let mut kappa: f64 = 1.0;

    let bnorm = st.b.amax();
    let hnorm = st.h.amax();
    let cnorm = st.c.amax();
    let mut trace = Vec::new();
    let mut last_step = 0.0;
    let mut last_sigma = 0.0;
    let mut stalls = 0;

    let unscale = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, s: &DVector<f64>, t: f64| {
        (
            x.component_mul(&eq.d) / t,
            y.component_mul(&eq.ea) / t,
            z.component_mul(&eq.eg) / t,
            s.component_div(&eq.eg) / t,
        )
    };
    let metrics = |xu: &DVector<f64>, yu: &DVector<f64>, zu: &DVector<f64>, su: &DVector<f64>| {
        let pres_a = (a_orig.mul(xu) - &st.b).amax() / (1.0 + bnorm);
        let pres_g = (g_orig.mul(xu) + su - &st.h).amax() / (1.0 + hnorm);
        let dres = (a_orig.mul_t(yu) + g_orig.mul_t(zu) + &st.c).amax() / (1.0 + cnorm);
        let pcost = st.c.dot(xu);
        let dcost = -st.b.dot(yu) - st.h.dot(zu);
        let gap = su.dot(zu);
        let denom = pcost.abs().min(dcost.abs()).max(1.0);
        let rel_gap = gap.abs().max((pcost - dcost).abs()) / denom;
        Metrics {
            pres: pres_a.max(pres_g),
            dres,
            pcost,
            dcost,
            gap,
            rel_gap,
        }
    };
    let finish = |status: SolveStatus,
                  iters: usize,
                  msg: String,
                  x: &DVector<f64>,
                  y: &DVector<f64>,
                  z: &DVector<f64>,
                  s: &DVector<f64>,
                  t: f64,
                  trace: Vec<IterationLog>| {
        let (xu, yu, zu, su) = unscale(x, y, z, s, t);
        let mt = metrics(&xu, &yu, &zu, &su);
        let xp = st.recover_x(&xu, &su);
        let objective = match status {
            SolveStatus::Infeasible => f64::NAN,
            SolveStatus::Unbounded => f64::INFINITY,
            _ => prog.objective_value(&xp),
        };
        SolverReport {
            status,
            y: st.recover_y(&yu, &zu),
            z: st.recover_z(&zu, nv),
            x: xp,
            objective,
            primal_residual: mt.pres,
            dual_residual: mt.dres,
            gap: mt.gap,
            rel_gap: mt.rel_gap,
            iterations: iters,
            wall_time: std::time::Duration::ZERO,
            message: msg,
            trace,
        }
    };

    for iter in 0..=opts.max_iter {
        if !(tau.is_finite() && kappa.is_finite()) || x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return finish(SolveStatus::NumericalFailure, iter, "non-finite iterate".into(), &x, &y, &z, &s, tau, trace);
        }
        let (xu, yu, zu, su) = unscale(&x, &y, &z, &s, tau);
        let mt = metrics(&xu, &yu, &zu, &su);
        if opts.keep_trace {
            trace.push(IterationLog {
                iter,
                primal_cost: mt.pcost,
                dual_cost: mt.dcost,
                rel_gap: mt.rel_gap,
                primal_residual: mt.pres,
                dual_residual: mt.dres,
                tau,
                kappa,
                step: last_step,
                sigma: last_sigma,
            });
        }
        if mt.pres <= opts.feas_tol && mt.dres <= opts.feas_tol && mt.rel_gap <= opts.gap_tol {
            return finish(SolveStatus::Optimal, iter, "optimal".into(), &x, &y, &z, &s, tau, trace);
        }
        // Certificates are scale free, so test them on the unnormalized iterate.
        let (xr, yr, zr, sr) = unscale(&x, &y, &z, &s, 1.0);
        let dual_val = st.b.dot(&yr) + st.h.dot(&zr);
        if dual_val < 0.0 && tau < kappa {
            let res = (a_orig.mul_t(&yr) + g_orig.mul_t(&zr)).amax() / -dual_val;
            if res <= opts.feas_tol {
                return finish(SolveStatus::Infeasible, iter, "primal infeasibility certificate".into(), &xr, &yr, &zr, &sr, 1.0, trace);
            }
        }
        let primal_val = st.c.dot(&xr);
        if primal_val < 0.0 && tau < kappa {
            let res = a_orig.mul(&xr).amax().max((g_orig.mul(&xr) + &sr).amax()) / -primal_val;
            if res <= opts.feas_tol {
                return finish(SolveStatus::Unbounded, iter, "dual infeasibility certificate".into(), &xr, &yr, &zr, &sr, 1.0, trace);
            }
        }
        if iter == opts.max_iter {
            break;
        }

        // Residuals of the embedding in scaled data.
        let rx = a_mat.mul_t(&y) + g_mat.mul_t(&z) + &sc.c * tau;
        let ry = a_mat.mul(&x) - &sc.b * tau;
        let rz = &s + g_mat.mul(&x) - &sc.h * tau;
        let rt = kappa + sc.c.dot(&x) + sc.b.dot(&y) + sc.h.dot(&z);

        let Some(w) = cones.nt_scaling(&s, &z) else {
            return finish(SolveStatus::NumericalFailure, iter, "iterate left the cone interior".into(), &x, &y, &z, &s, tau, trace);
        };
        let lambda = w.apply(&z);
        let Some(kkt) = Kkt::factor(&sc.a, &sc.g, n, &st.blocks, Scaling::Nt(&w)) else {
            return finish(SolveStatus::NumericalFailure, iter, "factorization failed".into(), &x, &y, &z, &s, tau, trace);
        };
        let Some(u1) = kkt.solve(&(-&sc.c), &sc.b, &sc.h) else {
            return finish(SolveStatus::NumericalFailure, iter, "linear solve failed".into(), &x, &y, &z, &s, tau, trace);
        };
        let u1_dot = sc.c.dot(&u1.x) + sc.b.dot(&u1.y) + sc.h.dot(&u1.z);
        let mu = (s.dot(&z) + tau * kappa) / (nu + 1.0);

        let direction = |eta: f64, ds_target: &DVector<f64>, dk_target: f64| -> Option<Direction> {
            let wt = w.apply(&cones.jordan_solve(&lambda, ds_target));
            let u2 = kkt.solve(&(&rx * -eta), &(&ry * -eta), &(&rz * -eta - &wt))?;
            let u2_dot = sc.c.dot(&u2.x) + sc.b.dot(&u2.y) + sc.h.dot(&u2.z);
            let dtau = (-eta * rt - dk_target / tau - u2_dot) / (u1_dot - kappa / tau);
            let dx = &u2.x + &u1.x * dtau;
            let dy = &u2.y + &u1.y * dtau;
            let dz = &u2.z + &u1.z * dtau;
            let ds = &wt - w.apply_sq(&dz);
            let dkappa = (dk_target - kappa * dtau) / tau;
            if !dtau.is_finite() {
                return None;
            }
            Some(Direction { x: dx, y: dy, z: dz, s: ds, tau: dtau, kappa: dkappa })
        };
        let max_step = |d: &Direction| -> f64 {
            let mut a = cones.max_step(&s, &d.s).min(cones.max_step(&z, &d.z));
            if d.tau < 0.0 {
                a = a.min(-tau / d.tau);
            }
            if d.kappa < 0.0 {
                a = a.min(-kappa / d.kappa);
            }
            a
        };

        let ll = cones.jordan(&lambda, &lambda);
        let Some(aff) = direction(1.0, &(-&ll), -tau * kappa) else {
            return finish(SolveStatus::NumericalFailure, iter, "affine direction failed".into(), &x, &y, &z, &s, tau, trace);
        };
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
        let cross = cones.jordan(&w.apply_inv(&aff.s), &w.apply(&aff.z));
        let ds_target = -&ll - cross + cones.identity() * (sigma * mu);
        let dk_target = -tau * kappa - aff.tau * aff.kappa + sigma * mu;
        let Some(dir) = direction(1.0 - sigma, &ds_target, dk_target) else {
            return finish(SolveStatus::NumericalFailure, iter, "combined direction failed".into(), &x, &y, &z, &s, tau, trace);
        };
        let alpha = (STEP_FRACTION * max_step(&dir)).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                return finish(SolveStatus::NumericalFailure, iter, "step length collapsed".into(), &x, &y, &z, &s, tau, trace);
            }
        } else {
            stalls = 0;
        }
        x += &dir.x * alpha;
        y += &dir.y * alpha;
        z += &dir.z * alpha;
        s += &dir.s * alpha;
        tau += dir.tau * alpha;
        kappa += dir.kappa * alpha;
        last_step = alpha;
        last_sigma = sigma;
    }
    finish(
        SolveStatus::NumericalFailure,
        opts.max_iter,
        format!("iteration limit {} reached", opts.max_iter),
        &x,
        &y,
        &z,
        &s,
        tau,
        trace,
    )
}
