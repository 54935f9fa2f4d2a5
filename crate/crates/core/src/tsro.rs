//! Cutting-plane robust envelopes: a master problem over a growing set of
//! impedance scenarios and a worst-violation search over the box vertices.

use crate::error::{Error, Result};
use crate::lintopf::{base_program, finish, EnvelopeOptions, EnvelopeResult, FeasibleRegion};
use crate::uncertainty::{ImpedanceUncertainty, NormKind, UncertaintyModel};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rdoe_conic::{backend, ConicProgram, LinExpr, SolveStatus};
use serde::Serialize;
use std::time::Instant;

/// Largest number of uncertain entries for vertex enumeration.
pub const MAX_BOX_ENTRIES: usize = 16;

#[derive(Debug, Clone)]
pub struct TsroOptions {
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for TsroOptions {
    fn default() -> Self {
        TsroOptions {
            tol: 1e-7,
            max_rounds: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxRounds,
    MasterNotOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsroRound {
    pub round: usize,
    pub master_objective_kw: Option<f64>,
    pub violation: f64,
    /// Index in the scenario list of the scenario added after this round.
    pub scenario_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsroTrace {
    pub rounds: Vec<TsroRound>,
    pub termination: Termination,
    /// Parameter vectors of all scenarios, the nominal one first.
    pub scenarios: Vec<Vec<f64>>,
}

impl TsroTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,master_objective_kw,violation,scenario_id\n");
        for r in &self.rounds {
            s.push_str(&format!(
                "{},{},{:.3e},{}\n",
                r.round,
                r.master_objective_kw.map_or(String::new(), |v| format!("{v:.6}")),
                r.violation,
                r.scenario_id.map_or(String::new(), |v| v.to_string())
            ));
        }
        s
    }
}

/// Envelopes feasible for every impedance matrix in `scenarios`, with one
/// copy of the network state per scenario.
pub fn tsro_master(
    fr: &FeasibleRegion,
    scenarios: &[DMatrix<f64>],
    opts: &EnvelopeOptions,
) -> Result<EnvelopeResult> {
    if scenarios.is_empty() {
        return Err(Error::Argument("the scenario set is empty".into()));
    }
    let start = Instant::now();
    let ls = &fr.system;
    let m = fr.dim();
    let (mut prog, layout) = base_program(fr, opts)?;
    let w = layout.w_exprs(fr, &layout.w_constant(fr, Some(&fr.p2)));
    for (s, e) in scenarios.iter().enumerate() {
        let l = prog.add_vars(m, &format!("l{s}_"));
        let v = prog.add_vars(m, &format!("v{s}_"));
        for r in 0..m {
            // C l + (A p + B q - b) = 0
            let mut row = w[r].clone();
            for c in 0..m {
                if ls.c[(r, c)] != 0.0 {
                    row.add_term(l[c], ls.c[(r, c)]);
                }
            }
            prog.add_eq(&row, 0.0);
            let mut drop = LinExpr::new();
            for c in 0..m {
                if ls.d[(r, c)] != 0.0 {
                    drop.add_term(v[c], ls.d[(r, c)]);
                }
                if e[(r, c)] != 0.0 {
                    drop.add_term(l[c], e[(r, c)]);
                }
            }
            prog.add_eq(&drop, ls.d_vec[r]);
        }
        for i in 0..ls.f.nrows() {
            let mut row = LinExpr::new();
            for c in 0..m {
                if ls.f[(i, c)] != 0.0 {
                    row.add_term(v[c], ls.f[(i, c)]);
                }
            }
            prog.add_le(&row, ls.f_vec[i]);
        }
    }
    let setup_s = start.elapsed().as_secs_f64();
    Ok(finish(&prog, &layout, fr, opts, "tsro", setup_s)?.0)
}

/// Smallest total slack that makes the network equations and voltage limits
/// hold at fixed `w` and impedance `e`.
pub fn min_slack(fr: &FeasibleRegion, e: &DMatrix<f64>, w: &DVector<f64>, opts: &EnvelopeOptions) -> Result<f64> {
    let ls = &fr.system;
    let m = fr.dim();
    let mut prog = ConicProgram::new();
    let l = prog.add_vars(m, "l");
    let v = prog.add_vars(m, "v");
    let slack = |prog: &mut ConicProgram, name: &str| {
        let j = prog.add_nonneg_var(name);
        prog.set_objective_coef(j, -1.0);
        j
    };
    for r in 0..m {
        let (tp, tm) = (slack(&mut prog, "t+"), slack(&mut prog, "t-"));
        let mut row = LinExpr::term(tp, 1.0) + LinExpr::term(tm, -1.0);
        for c in 0..m {
            if ls.c[(r, c)] != 0.0 {
                row.add_term(l[c], ls.c[(r, c)]);
            }
        }
        prog.add_eq(&row, -w[r]);
        let (sp, sm) = (slack(&mut prog, "s+"), slack(&mut prog, "s-"));
        let mut row = LinExpr::term(sp, 1.0) + LinExpr::term(sm, -1.0);
        for c in 0..m {
            if ls.d[(r, c)] != 0.0 {
                row.add_term(v[c], ls.d[(r, c)]);
            }
            if e[(r, c)] != 0.0 {
                row.add_term(l[c], e[(r, c)]);
            }
        }
        prog.add_eq(&row, ls.d_vec[r]);
    }
    for i in 0..ls.f.nrows() {
        let u = slack(&mut prog, "u");
        let mut row = LinExpr::term(u, -1.0);
        for c in 0..m {
            if ls.f[(i, c)] != 0.0 {
                row.add_term(v[c], ls.f[(i, c)]);
            }
        }
        prog.add_le(&row, ls.f_vec[i]);
    }
    let rep = backend(&opts.backend)?.solve(&prog, &opts.solver)?;
    match rep.status {
        SolveStatus::Optimal => Ok((-rep.objective).max(0.0)),
        s => Err(Error::Unsupported(format!("slack program ended {s}: {}", rep.message))),
    }
}

/// Parameter vectors at the corners of a single inf-norm ball.
pub fn box_vertices(imp: &ImpedanceUncertainty) -> Result<Vec<DVector<f64>>> {
    let balls = imp.set.balls();
    if balls.len() != 1 || balls[0].norm != NormKind::LInf {
        return Err(Error::Unsupported(
            "the cutting-plane method needs a single inf-norm impedance set".into(),
        ));
    }
    let ball = &balls[0];
    let k = ball.latent_dim();
    if k > MAX_BOX_ENTRIES {
        return Err(Error::Unsupported(format!(
            "{k} uncertain entries give 2^{k} vertices; at most {MAX_BOX_ENTRIES} are supported"
        )));
    }
    if ball.radius == 0.0 {
        return Ok(vec![ball.center.clone()]);
    }
    Ok((0..1usize << k)
        .map(|bits| {
            let x = DVector::from_fn(k, |j, _| if bits >> j & 1 == 1 { ball.radius } else { -ball.radius });
            ball.point(&x)
        })
        .collect())
}

/// Worst box vertex for fixed decisions and its slack value.
pub fn tsro_subproblem(
    fr: &FeasibleRegion,
    imp: &ImpedanceUncertainty,
    w: &DVector<f64>,
    opts: &EnvelopeOptions,
) -> Result<(f64, DVector<f64>)> {
    let vertices = box_vertices(imp)?;
    let values: Vec<f64> = vertices
        .par_iter()
        .map(|theta| min_slack(fr, &imp.params.apply(&fr.system.e, theta), w, opts))
        .collect::<Result<_>>()?;
    let (best, val) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    Ok((val, vertices[best].clone()))
}

pub fn tsro_solve(
    fr: &FeasibleRegion,
    model: &UncertaintyModel,
    opts: &EnvelopeOptions,
    tsro: &TsroOptions,
) -> Result<(EnvelopeResult, TsroTrace)> {
    let imp = model
        .impedance
        .as_ref()
        .ok_or_else(|| Error::Uncertainty("the cutting-plane method needs impedance uncertainty".into()))?;
    box_vertices(imp)?;
    let start = Instant::now();
    let center = imp.set.balls()[0].center.clone();
    let mut thetas = vec![center];
    let mut trace = TsroTrace {
        rounds: Vec::new(),
        termination: Termination::MaxRounds,
        scenarios: Vec::new(),
    };
    let mut last = None;
    for round in 1..=tsro.max_rounds {
        let es: Vec<DMatrix<f64>> = thetas.iter().map(|t| imp.params.apply(&fr.system.e, t)).collect();
        let res = tsro_master(fr, &es, opts)?;
        if !res.is_optimal() {
            trace.rounds.push(TsroRound {
                round,
                master_objective_kw: None,
                violation: f64::NAN,
                scenario_id: None,
            });
            trace.termination = Termination::MasterNotOptimal;
            last = Some(res);
            break;
        }
        let mut q2 = fr.q2.clone();
        for (j, c) in res.passive_q.iter().enumerate() {
            q2[j] = c.q_kvar;
        }
        let w = fr.system.injection_vector(&res.p1(), &fr.p2, &res.q1(), &q2);
        let (violation, worst) = tsro_subproblem(fr, imp, &w, opts)?;
        let done = violation <= tsro.tol;
        trace.rounds.push(TsroRound {
            round,
            master_objective_kw: res.objective_kw,
            violation,
            scenario_id: (!done).then_some(thetas.len()),
        });
        last = Some(res);
        if done {
            trace.termination = Termination::Converged;
            break;
        }
        thetas.push(worst);
    }
    trace.scenarios = thetas.iter().map(|t| t.iter().copied().collect()).collect();
    let mut result = last.expect("at least one round runs");
    result.mode = "tsro".into();
    result.timing.setup_s = 0.0;
    result.timing.solve_s = start.elapsed().as_secs_f64();
    Ok((result, trace))
}
