use super::envelope::{add_region_rows, base_program, AllocationPolicy, DecisionLayout, EnvelopeOptions};
use super::region::FeasibleRegion;
use crate::error::{Error, Result};
use rayon::prelude::*;
use rdoe_conic::{backend, ConicProgram};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub angle_deg: f64,
    pub p_a_kw: f64,
    pub p_b_kw: f64,
}

/// Support points of a 2-D slice, ordered by direction angle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polygon {
    pub points: Vec<BoundaryPoint>,
    pub diagnostic: Option<String>,
}

impl Polygon {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Counter-clockwise convexity of consecutive edges, skipping repeated
    /// support points.
    pub fn is_convex(&self, tol: f64) -> bool {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for p in &self.points {
            let q = (p.p_a_kw, p.p_b_kw);
            if pts.last().is_none_or(|l| (l.0 - q.0).hypot(l.1 - q.1) > tol) {
                pts.push(q);
            }
        }
        while pts.len() > 1 {
            let (f, l) = (pts[0], pts[pts.len() - 1]);
            if (f.0 - l.0).hypot(f.1 - l.1) > tol {
                break;
            }
            pts.pop();
        }
        let m = pts.len();
        if m < 3 {
            return true;
        }
        (0..m).all(|k| {
            let (a, b, c) = (pts[k], pts[(k + 1) % m], pts[(k + 2) % m]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) >= -tol
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,p_a_kw,p_b_kw\n");
        for p in &self.points {
            s.push_str(&format!("{:.4},{:.6},{:.6}\n", p.angle_deg, p.p_a_kw, p.p_b_kw));
        }
        s
    }
}

/// Ray sweep over the slice spanned by two active customers. `constrain`
/// adds the region's constraints to a program whose decisions are laid out
/// as given.
pub fn trace_region<F>(fr: &FeasibleRegion, opts: &EnvelopeOptions, n_directions: usize, constrain: F) -> Result<Polygon>
where
    F: Fn(&mut ConicProgram, &DecisionLayout) -> Result<()>,
{
    if fr.system.n_active() != 2 {
        return Err(Error::Argument(format!(
            "a 2-D trace needs exactly two active customers, network has {}",
            fr.system.n_active()
        )));
    }
    if n_directions < 3 {
        return Err(Error::Argument("at least three directions are needed".into()));
    }
    let opts = EnvelopeOptions {
        allocation: AllocationPolicy::Independent,
        ..opts.clone()
    };
    let (mut prog, layout) = base_program(fr, &opts)?;
    constrain(&mut prog, &layout)?;
    let solver = backend(&opts.backend)?;
    let results: Vec<_> = (0..n_directions)
        .into_par_iter()
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n_directions as f64;
            let mut p = prog.clone();
            p.set_objective_coef(layout.p1[0], theta.cos());
            p.set_objective_coef(layout.p1[1], theta.sin());
            let rep = solver.solve(&p, &opts.solver);
            (theta, rep)
        })
        .collect();
    let mut poly = Polygon::default();
    for (theta, rep) in results {
        let rep = rep?;
        if !rep.is_optimal() {
            poly.points.clear();
            poly.diagnostic = Some(format!(
                "direction {:.2} deg: {} ({})",
                theta.to_degrees(),
                rep.status,
                rep.message
            ));
            return Ok(poly);
        }
        poly.points.push(BoundaryPoint {
            angle_deg: theta.to_degrees(),
            p_a_kw: rep.x[layout.p1[0]],
            p_b_kw: rep.x[layout.p1[1]],
        });
    }
    Ok(poly)
}

/// Deterministic feasible-region slice.
pub fn trace_fr_2d(fr: &FeasibleRegion, opts: &EnvelopeOptions, n_directions: usize) -> Result<Polygon> {
    trace_region(fr, opts, n_directions, |p, l| {
        add_region_rows(p, fr, l);
        Ok(())
    })
}
