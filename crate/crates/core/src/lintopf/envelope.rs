use super::region::FeasibleRegion;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rdoe_conic::{backend, ConicProgram, LinExpr, SolveOptions, SolveStatus, SolverReport, DEFAULT_BACKEND};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Maximize total export (most negative `1'p1`).
    #[default]
    Export,
    Import,
}

impl Direction {
    /// Objective weight on each `p1` entry.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Export => -1.0,
            Direction::Import => 1.0,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "export" => Ok(Direction::Export),
            "import" => Ok(Direction::Import),
            _ => Err(Error::Argument(format!("unknown direction '{s}' (export|import)"))),
        }
    }
}

/// Which reactive powers are decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QControl {
    /// Active customers' q held at their stated value, passive q at forecast.
    #[default]
    Fixed,
    Active,
    /// Active and passive q within their bounds.
    All,
}

impl QControl {
    pub fn q1(self) -> bool {
        !matches!(self, QControl::Fixed)
    }

    pub fn q2(self) -> bool {
        matches!(self, QControl::All)
    }
}

impl FromStr for QControl {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "none" => Ok(QControl::Fixed),
            "active" => Ok(QControl::Active),
            "all" => Ok(QControl::All),
            _ => Err(Error::Argument(format!("unknown q control '{s}' (fixed|active|all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum AllocationPolicy {
    /// All active customers receive the same envelope.
    #[default]
    StrictlyEqual,
    /// `p_i = weight_i * lambda` for a common `lambda`.
    Weighted { weights: Vec<f64> },
    /// No coupling between customers.
    Independent,
}

impl fmt::Display for AllocationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationPolicy::StrictlyEqual => f.write_str("equal"),
            AllocationPolicy::Weighted { .. } => f.write_str("weighted"),
            AllocationPolicy::Independent => f.write_str("independent"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeOptions {
    pub direction: Direction,
    pub allocation: AllocationPolicy,
    pub q_control: QControl,
    pub solver: SolveOptions,
    pub backend: String,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            direction: Direction::Export,
            allocation: AllocationPolicy::StrictlyEqual,
            q_control: QControl::Fixed,
            solver: SolveOptions::from_env(),
            backend: DEFAULT_BACKEND.to_string(),
        }
    }
}

/// Where the decision variables sit in a program.
#[derive(Debug, Clone)]
pub struct DecisionLayout {
    pub p1: Vec<usize>,
    pub q1: Option<Vec<usize>>,
    pub q2: Option<Vec<usize>>,
}

impl DecisionLayout {
    /// Constant part of `w`: `-b`, passive `p2` when given, and the
    /// reactive powers that are not decisions.
    pub fn w_constant(&self, fr: &FeasibleRegion, p2: Option<&DVector<f64>>) -> DVector<f64> {
        let ls = &fr.system;
        let mut w = -&ls.b;
        if let Some(p2) = p2 {
            w += &ls.a2 * p2;
        }
        if self.q1.is_none() {
            w += &ls.b1 * &ls.q1_fixed;
        }
        if self.q2.is_none() {
            w += &ls.b2 * &fr.q2;
        }
        w
    }

    /// `M w` as affine expressions in the decisions, where the constant part
    /// of `w` is `w_const`.
    pub fn affine(&self, fr: &FeasibleRegion, m: &DMatrix<f64>, w_const: &DVector<f64>) -> Vec<LinExpr> {
        let ls = &fr.system;
        let ma1 = m * &ls.a1;
        let c = m * w_const;
        let mb1 = self.q1.as_ref().map(|_| m * &ls.b1);
        let mb2 = self.q2.as_ref().map(|_| m * &ls.b2);
        (0..m.nrows())
            .map(|i| {
                let mut e = LinExpr::constant(c[i]);
                add_row(&mut e, &ma1, i, &self.p1);
                if let (Some(mb), Some(v)) = (&mb1, &self.q1) {
                    add_row(&mut e, mb, i, v);
                }
                if let (Some(mb), Some(v)) = (&mb2, &self.q2) {
                    add_row(&mut e, mb, i, v);
                }
                e
            })
            .collect()
    }

    /// `w` itself as affine expressions.
    pub fn w_exprs(&self, fr: &FeasibleRegion, w_const: &DVector<f64>) -> Vec<LinExpr> {
        let n = fr.dim();
        self.affine(fr, &DMatrix::identity(n, n), w_const)
    }

    pub fn values(&self, x: &[f64], fr: &FeasibleRegion) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let ls = &fr.system;
        let pick = |v: &Vec<usize>| DVector::from_iterator(v.len(), v.iter().map(|&j| x[j]));
        let p1 = pick(&self.p1);
        let q1 = self.q1.as_ref().map(pick).unwrap_or_else(|| ls.q1_fixed.clone());
        let q2 = self.q2.as_ref().map(pick).unwrap_or_else(|| fr.q2.clone());
        (p1, q1, q2)
    }
}

fn add_row(e: &mut LinExpr, m: &DMatrix<f64>, i: usize, vars: &[usize]) {
    for (j, &v) in vars.iter().enumerate() {
        let a = m[(i, j)];
        if a != 0.0 {
            e.add_term(v, a);
        }
    }
}

/// Decision variables, their bounds, the allocation coupling and the
/// objective. Network constraints are added by the caller.
pub fn base_program(fr: &FeasibleRegion, opts: &EnvelopeOptions) -> Result<(ConicProgram, DecisionLayout)> {
    let ls = &fr.system;
    let na = ls.n_active();
    if na == 0 {
        return Err(Error::Argument("network has no active customers".into()));
    }
    let mut prog = ConicProgram::new();
    let p1: Vec<usize> = ls.active.iter().map(|id| prog.add_var(format!("p1[{id}]"))).collect();
    for (j, b) in p1.iter().zip(&ls.p1_bounds) {
        prog.add_bounds(*j, b[0], b[1]);
    }
    let q1 = opts.q_control.q1().then(|| {
        let v: Vec<usize> = ls.active.iter().map(|id| prog.add_var(format!("q1[{id}]"))).collect();
        for (j, b) in v.iter().zip(&ls.q1_bounds) {
            prog.add_bounds(*j, b[0], b[1]);
        }
        v
    });
    let q2 = opts.q_control.q2().then(|| {
        let v: Vec<usize> = ls.passive.iter().map(|id| prog.add_var(format!("q2[{id}]"))).collect();
        for (j, b) in v.iter().zip(&ls.q2_bounds) {
            prog.add_bounds(*j, b[0], b[1]);
        }
        v
    });
    match &opts.allocation {
        AllocationPolicy::StrictlyEqual => {
            for w in p1.windows(2) {
                prog.add_eq(&(LinExpr::var(w[1]) - LinExpr::var(w[0])), 0.0);
            }
        }
        AllocationPolicy::Weighted { weights } => {
            if weights.len() != na {
                return Err(Error::Argument(format!(
                    "{} allocation weights given for {na} active customers",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::Argument("allocation weights must be positive".into()));
            }
            let lambda = prog.add_var("lambda");
            for (j, w) in p1.iter().zip(weights) {
                prog.add_eq(&(LinExpr::var(*j) - LinExpr::term(lambda, *w)), 0.0);
            }
        }
        AllocationPolicy::Independent => {}
    }
    let sign = opts.direction.sign();
    for &j in &p1 {
        prog.set_objective_coef(j, sign);
    }
    Ok((prog, DecisionLayout { p1, q1, q2 }))
}

/// Adds `R w <= t` at the stored passive demand.
pub fn add_region_rows(prog: &mut ConicProgram, fr: &FeasibleRegion, layout: &DecisionLayout) {
    let w_const = layout.w_constant(fr, Some(&fr.p2));
    for (i, e) in layout.affine(fr, &fr.r, &w_const).iter().enumerate() {
        prog.add_le(e, fr.t[i]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerEnvelope {
    pub id: String,
    pub p_kw: f64,
    pub q_kvar: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub setup_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub mode: String,
    pub direction: Direction,
    pub allocation: AllocationPolicy,
    pub q_control: QControl,
    pub status: SolveStatus,
    /// `1'p1` in kW; negative for export.
    pub objective_kw: Option<f64>,
    pub active: Vec<CustomerEnvelope>,
    /// Passive reactive powers, listed only when they are decisions.
    pub passive_q: Vec<CustomerEnvelope>,
    pub iterations: usize,
    pub message: String,
    #[serde(skip)]
    pub timing: Timing,
}

impl EnvelopeResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn p1(&self) -> DVector<f64> {
        DVector::from_iterator(self.active.len(), self.active.iter().map(|c| c.p_kw))
    }

    pub fn q1(&self) -> DVector<f64> {
        DVector::from_iterator(self.active.len(), self.active.iter().map(|c| c.q_kvar))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope result serializes")
    }

    /// `customer,kind,p_kw,q_kvar` rounded to four decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("customer,kind,p_kw,q_kvar\n");
        let fmt4 = |v: f64| {
            let r = (v * 1e4).round() / 1e4;
            format!("{:.4}", if r == 0.0 { 0.0 } else { r })
        };
        for c in &self.active {
            s.push_str(&format!("{},active,{},{}\n", c.id, fmt4(c.p_kw), fmt4(c.q_kvar)));
        }
        for c in &self.passive_q {
            s.push_str(&format!("{},passive,{},{}\n", c.id, fmt4(c.p_kw), fmt4(c.q_kvar)));
        }
        s
    }
}

/// Solves a prepared program and packages the envelopes.
pub fn finish(
    prog: &ConicProgram,
    layout: &DecisionLayout,
    fr: &FeasibleRegion,
    opts: &EnvelopeOptions,
    mode: &str,
    setup_s: f64,
) -> Result<(EnvelopeResult, SolverReport)> {
    let solver = backend(&opts.backend)?;
    let t0 = Instant::now();
    let rep = solver.solve(prog, &opts.solver)?;
    let solve_s = t0.elapsed().as_secs_f64();
    let ls = &fr.system;
    let (active, passive_q, objective_kw) = if rep.is_optimal() {
        let (p1, q1, q2) = layout.values(&rep.x, fr);
        let active = ls
            .active
            .iter()
            .enumerate()
            .map(|(j, id)| CustomerEnvelope {
                id: id.clone(),
                p_kw: p1[j],
                q_kvar: q1[j],
            })
            .collect();
        let passive_q = if layout.q2.is_some() {
            ls.passive
                .iter()
                .enumerate()
                .map(|(j, id)| CustomerEnvelope {
                    id: id.clone(),
                    p_kw: fr.p2[j],
                    q_kvar: q2[j],
                })
                .collect()
        } else {
            Vec::new()
        };
        (active, passive_q, Some(p1.sum()))
    } else {
        (Vec::new(), Vec::new(), None)
    };
    let result = EnvelopeResult {
        mode: mode.to_string(),
        direction: opts.direction,
        allocation: opts.allocation.clone(),
        q_control: opts.q_control,
        status: rep.status,
        objective_kw,
        active,
        passive_q,
        iterations: rep.iterations,
        message: rep.message.clone(),
        timing: Timing { setup_s, solve_s },
    };
    Ok((result, rep))
}

/// Deterministic envelopes: maximize the objective over the feasible region.
pub fn solve_ddoe(fr: &FeasibleRegion, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    let start = Instant::now();
    let (mut prog, layout) = base_program(fr, opts)?;
    add_region_rows(&mut prog, fr, &layout);
    let setup_s = start.elapsed().as_secs_f64();
    Ok(finish(&prog, &layout, fr, opts, "det", setup_s)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lintopf::{assemble, OperatingPoint};
    use crate::netmodel::NetworkModel;

    fn twobus() -> FeasibleRegion {
        let net = NetworkModel::bundled("twobus").unwrap();
        let ls = assemble(&net, &OperatingPoint::flat(&net)).unwrap();
        FeasibleRegion::with_forecast(ls, &net).unwrap()
    }

    #[test]
    fn equal_allocation_spread() {
        let fr = twobus();
        let r = solve_ddoe(&fr, &EnvelopeOptions::default()).unwrap();
        assert!(r.is_optimal(), "{}", r.message);
        let p = r.p1();
        assert!(p.max() - p.min() <= 1e-6);
        assert!(r.objective_kw.unwrap() < 0.0);
    }

    #[test]
    fn csv_rounds_and_drops_negative_zero() {
        let r = EnvelopeResult {
            mode: "det".into(),
            direction: Direction::Export,
            allocation: AllocationPolicy::StrictlyEqual,
            q_control: QControl::Fixed,
            status: SolveStatus::Optimal,
            objective_kw: Some(-1.0),
            active: vec![CustomerEnvelope {
                id: "1".into(),
                p_kw: -1.234_56,
                q_kvar: -0.000_01,
            }],
            passive_q: vec![],
            iterations: 3,
            message: String::new(),
            timing: Timing::default(),
        };
        assert_eq!(r.to_csv(), "customer,kind,p_kw,q_kvar\n1,active,-1.2346,0.0000\n");
    }

    #[test]
    fn weighted_policy_respects_ratio() {
        let fr = twobus();
        let opts = EnvelopeOptions {
            allocation: AllocationPolicy::Weighted { weights: vec![1.0, 2.0] },
            ..EnvelopeOptions::default()
        };
        let r = solve_ddoe(&fr, &opts).unwrap();
        let p = r.p1();
        assert!((p[1] - 2.0 * p[0]).abs() < 1e-6);
    }
}
