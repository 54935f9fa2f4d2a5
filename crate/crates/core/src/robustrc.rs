//! Robust counterparts of the feasible region under impedance and demand
//! uncertainty, and the envelopes they give.

use crate::error::{Error, Result};
use crate::lintopf::{
    base_program, finish, solve_ddoe, DecisionLayout, EnvelopeOptions, EnvelopeResult, FeasibleRegion,
};
use crate::uncertainty::{add_support_bound, BallSet, ImpedanceUncertainty, UncertaintyModel};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rdoe_conic::{ConicProgram, LinExpr};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobustMode {
    #[serde(rename = "det")]
    Deterministic,
    Impedance,
    Demand,
    /// Impedance and demand together, over the extreme points of the demand set.
    Bilinear,
}

impl fmt::Display for RobustMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobustMode::Deterministic => "det",
            RobustMode::Impedance => "impedance",
            RobustMode::Demand => "demand",
            RobustMode::Bilinear => "bilinear",
        })
    }
}

impl FromStr for RobustMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(RobustMode::Deterministic),
            "impedance" => Ok(RobustMode::Impedance),
            "demand" => Ok(RobustMode::Demand),
            "bilinear" => Ok(RobustMode::Bilinear),
            _ => Err(Error::Argument(format!(
                "unknown mode '{s}' (det|impedance|demand|bilinear)"
            ))),
        }
    }
}

/// An assembled robust envelope program.
#[derive(Debug, Clone)]
pub struct RobustProblem {
    pub mode: RobustMode,
    pub program: ConicProgram,
    pub layout: DecisionLayout,
    /// Number of robust row blocks added (rows times demand vertices).
    pub blocks: usize,
    pub setup_s: f64,
}

fn impedance_of(model: &UncertaintyModel) -> Result<&ImpedanceUncertainty> {
    model
        .impedance
        .as_ref()
        .ok_or_else(|| Error::Uncertainty("this mode needs impedance uncertainty".into()))
}

/// Robust rows for impedance uncertainty with `w` constant part `w_const`.
/// Row `i` becomes `r_fix_i w + sup_theta theta' K_i w <= t_i`.
pub fn add_impedance_rows(
    prog: &mut ConicProgram,
    layout: &DecisionLayout,
    fr: &FeasibleRegion,
    imp: &ImpedanceUncertainty,
    w_consts: &[DVector<f64>],
) {
    let ls = &fr.system;
    let e_fix = imp.params.fixed_part(&ls.e);
    let r_fix = &fr.g * &e_fix * &ls.c_inv;
    let rows = fr.num_rows();
    // K_i depends only on the row; the demand vertices only move constants.
    let ks: Vec<DMatrix<f64>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let g_row: Vec<f64> = fr.g.row(i).iter().copied().collect();
            imp.params.k_matrix(&g_row, &ls.c_inv)
        })
        .collect();
    for w_const in w_consts {
        let fixed = layout.affine(fr, &r_fix, w_const);
        let ys: Vec<Vec<LinExpr>> = ks.par_iter().map(|k| layout.affine(fr, k, w_const)).collect();
        for i in 0..rows {
            let bound = add_support_bound(prog, &imp.set, &ys[i]);
            prog.add_le(&(fixed[i].clone() + bound), fr.t[i]);
        }
    }
}

pub fn build_rc_impedance(fr: &FeasibleRegion, model: &UncertaintyModel, opts: &EnvelopeOptions) -> Result<RobustProblem> {
    let start = Instant::now();
    let imp = impedance_of(model)?;
    let (mut program, layout) = base_program(fr, opts)?;
    let w_const = layout.w_constant(fr, Some(&fr.p2));
    add_impedance_rows(&mut program, &layout, fr, imp, std::slice::from_ref(&w_const));
    Ok(RobustProblem {
        mode: RobustMode::Impedance,
        program,
        layout,
        blocks: fr.num_rows(),
        setup_s: start.elapsed().as_secs_f64(),
    })
}

/// `sup` of `g' x` over a demand set, as a constant when one ball suffices
/// and through split variables otherwise.
fn demand_term(prog: &mut ConicProgram, set: &BallSet, g: &DVector<f64>) -> Result<LinExpr> {
    if set.balls().len() == 1 {
        return Ok(LinExpr::constant(set.balls()[0].support(g)?));
    }
    let y: Vec<LinExpr> = g.iter().map(|&v| LinExpr::constant(v)).collect();
    Ok(add_support_bound(prog, set, &y))
}

/// Robust rows for uncertain passive demand at nominal impedances.
pub fn add_demand_rows(
    prog: &mut ConicProgram,
    layout: &DecisionLayout,
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
) -> Result<()> {
    let ls = &fr.system;
    if model.p2.is_none() && model.q2.is_none() {
        return Err(Error::Uncertainty("demand mode needs p2 or q2 uncertainty".into()));
    }
    if model.q2.is_some() && layout.q2.is_some() {
        return Err(Error::Uncertainty(
            "passive reactive power cannot be both a decision and uncertain".into(),
        ));
    }
    let mut w_const = layout.w_constant(fr, model.p2.is_none().then_some(&fr.p2));
    if model.q2.is_some() {
        w_const -= &ls.b2 * &fr.q2;
    }
    let base = layout.affine(fr, &fr.r, &w_const);
    let gp = model.p2.as_ref().map(|_| (&fr.r * &ls.a2).transpose());
    let gq = model.q2.as_ref().map(|_| (&fr.r * &ls.b2).transpose());
    for (i, row) in base.into_iter().enumerate() {
        let mut e = row;
        if let (Some(set), Some(g)) = (&model.p2, &gp) {
            e += &demand_term(prog, set, &g.column(i).into_owned())?;
        }
        if let (Some(set), Some(g)) = (&model.q2, &gq) {
            e += &demand_term(prog, set, &g.column(i).into_owned())?;
        }
        prog.add_le(&e, fr.t[i]);
    }
    Ok(())
}

pub fn build_rc_demand(fr: &FeasibleRegion, model: &UncertaintyModel, opts: &EnvelopeOptions) -> Result<RobustProblem> {
    let start = Instant::now();
    let (mut program, layout) = base_program(fr, opts)?;
    add_demand_rows(&mut program, &layout, fr, model)?;
    Ok(RobustProblem {
        mode: RobustMode::Demand,
        program,
        layout,
        blocks: fr.num_rows(),
        setup_s: start.elapsed().as_secs_f64(),
    })
}

/// Passive active-power values at the extreme points of the demand set.
pub fn demand_vertices(model: &UncertaintyModel) -> Result<Vec<DVector<f64>>> {
    let set = model
        .p2
        .as_ref()
        .ok_or_else(|| Error::Uncertainty("bilinear mode needs p2 uncertainty".into()))?;
    let ball = &set.balls()[0];
    Ok(set.cross_vertices()?.iter().map(|y| ball.point(y)).collect())
}

pub fn add_bilinear_rows(
    prog: &mut ConicProgram,
    layout: &DecisionLayout,
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
) -> Result<usize> {
    let imp = impedance_of(model)?;
    if model.q2.is_some() {
        return Err(Error::Unsupported(
            "bilinear mode covers p2 only; drop the q2 uncertainty".into(),
        ));
    }
    let w_consts: Vec<DVector<f64>> = demand_vertices(model)?
        .iter()
        .map(|p2| layout.w_constant(fr, Some(p2)))
        .collect();
    add_impedance_rows(prog, layout, fr, imp, &w_consts);
    Ok(w_consts.len() * fr.num_rows())
}

pub fn build_rc_bilinear(fr: &FeasibleRegion, model: &UncertaintyModel, opts: &EnvelopeOptions) -> Result<RobustProblem> {
    let start = Instant::now();
    let (mut program, layout) = base_program(fr, opts)?;
    let blocks = add_bilinear_rows(&mut program, &layout, fr, model)?;
    Ok(RobustProblem {
        mode: RobustMode::Bilinear,
        program,
        layout,
        blocks,
        setup_s: start.elapsed().as_secs_f64(),
    })
}

pub fn build(fr: &FeasibleRegion, model: &UncertaintyModel, mode: RobustMode, opts: &EnvelopeOptions) -> Result<RobustProblem> {
    match mode {
        RobustMode::Impedance => build_rc_impedance(fr, model, opts),
        RobustMode::Demand => build_rc_demand(fr, model, opts),
        RobustMode::Bilinear => build_rc_bilinear(fr, model, opts),
        RobustMode::Deterministic => {
            let start = Instant::now();
            let (mut program, layout) = base_program(fr, opts)?;
            crate::lintopf::add_region_rows(&mut program, fr, &layout);
            Ok(RobustProblem {
                mode,
                program,
                layout,
                blocks: fr.num_rows(),
                setup_s: start.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Adds the constraints of `mode` to a program laid out by `base_program`.
pub fn constrain(
    prog: &mut ConicProgram,
    layout: &DecisionLayout,
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
    mode: RobustMode,
) -> Result<()> {
    match mode {
        RobustMode::Deterministic => {
            crate::lintopf::add_region_rows(prog, fr, layout);
        }
        RobustMode::Impedance => {
            let w_const = layout.w_constant(fr, Some(&fr.p2));
            add_impedance_rows(prog, layout, fr, impedance_of(model)?, std::slice::from_ref(&w_const));
        }
        RobustMode::Demand => add_demand_rows(prog, layout, fr, model)?,
        RobustMode::Bilinear => {
            add_bilinear_rows(prog, layout, fr, model)?;
        }
    }
    Ok(())
}

pub fn solve_problem(fr: &FeasibleRegion, problem: &RobustProblem, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    Ok(finish(
        &problem.program,
        &problem.layout,
        fr,
        opts,
        &problem.mode.to_string(),
        problem.setup_s,
    )?
    .0)
}

/// Robust envelopes for `mode`; the deterministic mode ignores `model`.
pub fn solve_rdoe(
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
    mode: RobustMode,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeResult> {
    if mode == RobustMode::Deterministic {
        return solve_ddoe(fr, opts);
    }
    let problem = build(fr, model, mode, opts)?;
    solve_problem(fr, &problem, opts)
}

/// Largest linear-model row violation `R(E) w - t` over `samples` draws of
/// the uncertain quantities that `mode` protects against.
pub fn sampled_worst_violation(
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
    mode: RobustMode,
    result: &EnvelopeResult,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let ls = &fr.system;
    let p1 = result.p1();
    let q1 = result.q1();
    let mut q2 = fr.q2.clone();
    for (j, c) in result.passive_q.iter().enumerate() {
        q2[j] = c.q_kvar;
    }
    let (use_e, use_d) = match mode {
        RobustMode::Deterministic => (false, false),
        RobustMode::Impedance => (true, false),
        RobustMode::Demand => (false, true),
        RobustMode::Bilinear => (true, true),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let e = if use_e {
            let imp = impedance_of(model)?;
            let theta = imp.set.sample(&mut rng)?;
            imp.params.apply(&ls.e, &theta)
        } else {
            ls.e.clone()
        };
        let p2 = match (&model.p2, use_d) {
            (Some(set), true) => set.sample(&mut rng)?,
            _ => fr.p2.clone(),
        };
        let q2s = match (&model.q2, use_d) {
            (Some(set), true) => set.sample(&mut rng)?,
            _ => q2.clone(),
        };
        let w = ls.injection_vector(&p1, &p2, &q1, &q2s);
        worst = worst.max((fr.rows_with(&e, &w) - &fr.t).max());
    }
    Ok(worst)
}
