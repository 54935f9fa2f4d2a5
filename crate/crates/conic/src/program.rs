//! Solver-agnostic conic program representation.
//!
//! A [`ConicProgram`] is kept in standard form:
//!
//! ```text
//!   maximize    c'x + c0
//!   subject to  A x = b
//!               x_K in K   for every cone K in the cone list
//! ```
//!
//! Variables that belong to no cone are free. Inequalities, bounds and norm
//! epigraphs are lowered onto this form by the builder methods, which add
//! slack variables in nonnegative orthants or second-order cones.

use crate::norm::NormKind;
use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use thiserror::Error;

/// Sparse affine expression `sum_j coef_j * x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coef: f64) -> Self {
        LinExpr {
            terms: vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, index: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for &(j, a) in &other.terms {
            self.terms.push((j, a * scale));
        }
        self.constant += other.constant * scale;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>() + self.constant
    }

    /// Merge duplicate variables and drop exact zeros; terms come out sorted.
    pub fn compact(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (j, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinExpr {
            terms: merged,
            constant: self.constant,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// Variables `start..start + len` are nonnegative.
    NonNegative { start: usize, len: usize },
    /// `(t, x_1..x_d)` with `||x||_2 <= t`.
    SecondOrder(Vec<usize>),
}

impl Cone {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Cone::NonNegative { start, len } => (*start..start + len).collect(),
            Cone::SecondOrder(idx) => idx.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cone::NonNegative { len, .. } => *len,
            Cone::SecondOrder(idx) => idx.len(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("variable index {index} out of range ({num_vars} variables)")]
    VariableOutOfRange { index: usize, num_vars: usize },
    #[error("variable {index} ('{name}') appears in more than one cone")]
    VariableInTwoCones { index: usize, name: String },
    #[error("second-order cone {cone} is empty")]
    EmptyCone { cone: usize },
    #[error("non-finite coefficient in {location}")]
    NonFinite { location: String },
    #[error("malformed program dump at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    objective: Vec<f64>,
    objective_constant: f64,
    eq_rows: Vec<Vec<(usize, f64)>>,
    eq_rhs: Vec<f64>,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn eq_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.eq_rows
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.objective.push(0.0);
        self.names.len() - 1
    }

    pub fn add_vars(&mut self, count: usize, prefix: &str) -> Vec<usize> {
        (0..count)
            .map(|k| self.add_var(format!("{prefix}[{k}]")))
            .collect()
    }

    /// New variable constrained to be nonnegative. Consecutive nonnegative
    /// variables share one orthant entry in the cone list.
    pub fn add_nonneg_var(&mut self, name: impl Into<String>) -> usize {
        let j = self.add_var(name);
        match self.cones.last_mut() {
            Some(Cone::NonNegative { start, len }) if *start + *len == j => *len += 1,
            _ => self.cones.push(Cone::NonNegative { start: j, len: 1 }),
        }
        j
    }

    pub fn set_objective_coef(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    /// Adds `expr` to the (maximized) objective.
    pub fn add_objective(&mut self, expr: &LinExpr) {
        for &(j, a) in &expr.terms {
            self.objective[j] += a;
        }
        self.objective_constant += expr.constant;
    }

    /// `lhs = rhs`; the constant of `lhs` is moved to the right-hand side.
    pub fn add_eq(&mut self, lhs: &LinExpr, rhs: f64) -> usize {
        let e = lhs.compact();
        self.eq_rows.push(e.terms);
        self.eq_rhs.push(rhs - e.constant);
        self.eq_rows.len() - 1
    }

    /// `lhs <= rhs` through a nonnegative slack. Returns the slack variable.
    pub fn add_le(&mut self, lhs: &LinExpr, rhs: f64) -> usize {
        let s = self.add_nonneg_var(format!("slack[{}]", self.eq_rows.len()));
        let mut e = lhs.clone();
        e.add_term(s, 1.0);
        self.add_eq(&e, rhs);
        s
    }

    /// `lhs >= rhs` through a nonnegative surplus. Returns the surplus variable.
    pub fn add_ge(&mut self, lhs: &LinExpr, rhs: f64) -> usize {
        let s = self.add_nonneg_var(format!("surplus[{}]", self.eq_rows.len()));
        let mut e = lhs.clone();
        e.add_term(s, -1.0);
        self.add_eq(&e, rhs);
        s
    }

    /// Box bounds on a single variable; infinite ends are skipped.
    pub fn add_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        if lo.is_finite() && hi.is_finite() && lo == hi {
            self.add_eq(&LinExpr::var(var), lo);
            return;
        }
        if lo.is_finite() {
            self.add_ge(&LinExpr::var(var), lo);
        }
        if hi.is_finite() {
            self.add_le(&LinExpr::var(var), hi);
        }
    }

    /// `||(x_1..x_d)||_2 <= t` for affine `t` and `x_i`. Returns the cone variables.
    pub fn add_soc(&mut self, t: &LinExpr, xs: &[LinExpr]) -> Vec<usize> {
        let row = self.eq_rows.len();
        let first = self.num_vars();
        let mut idx = Vec::with_capacity(xs.len() + 1);
        for (k, expr) in std::iter::once(t).chain(xs.iter()).enumerate() {
            let u = self.add_var(format!("soc[{row}].{k}"));
            let mut e = expr.clone();
            e.add_term(u, -1.0);
            self.add_eq(&e, 0.0);
            idx.push(u);
        }
        debug_assert_eq!(idx[0], first);
        self.cones.push(Cone::SecondOrder(idx.clone()));
        idx
    }

    /// Epigraph of a norm: `||(arg_1..arg_d)|| <= bound`.
    ///
    /// L1 introduces one auxiliary per component (`|arg_k| <= a_k`,
    /// `sum a_k <= bound`), LInf bounds every component pairwise, and L2
    /// becomes a single second-order cone.
    pub fn add_norm_epigraph(&mut self, norm: NormKind, args: &[LinExpr], bound: &LinExpr) {
        match norm {
            NormKind::L1 => {
                let mut total = LinExpr::new();
                for (k, arg) in args.iter().enumerate() {
                    let a = self.add_var(format!("l1aux[{}].{k}", self.eq_rows.len()));
                    let up = LinExpr::var(a) - arg.clone();
                    let dn = LinExpr::var(a) + arg.clone();
                    self.add_ge(&up, 0.0);
                    self.add_ge(&dn, 0.0);
                    total.add_term(a, 1.0);
                }
                let gap = bound.clone() - total;
                self.add_ge(&gap, 0.0);
            }
            NormKind::LInf => {
                if args.is_empty() {
                    self.add_ge(bound, 0.0);
                }
                for arg in args {
                    self.add_ge(&(bound.clone() - arg.clone()), 0.0);
                    self.add_ge(&(bound.clone() + arg.clone()), 0.0);
                }
            }
            NormKind::L2 => {
                self.add_soc(bound, args);
            }
        }
    }

    /// Index of the cone containing each variable.
    pub fn cone_membership(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.num_vars()];
        for (k, cone) in self.cones.iter().enumerate() {
            for j in cone.indices() {
                if j < owner.len() {
                    owner[j] = Some(k);
                }
            }
        }
        owner
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.dim() == 0 {
                return Err(ProgramError::EmptyCone { cone: k });
            }
            for j in cone.indices() {
                if j >= n {
                    return Err(ProgramError::VariableOutOfRange {
                        index: j,
                        num_vars: n,
                    });
                }
                if seen.insert(j, k).is_some() {
                    return Err(ProgramError::VariableInTwoCones {
                        index: j,
                        name: self.names[j].clone(),
                    });
                }
            }
        }
        for (r, row) in self.eq_rows.iter().enumerate() {
            for &(j, a) in row {
                if j >= n {
                    return Err(ProgramError::VariableOutOfRange {
                        index: j,
                        num_vars: n,
                    });
                }
                if !a.is_finite() {
                    return Err(ProgramError::NonFinite {
                        location: format!("equality row {r}"),
                    });
                }
            }
            if !self.eq_rhs[r].is_finite() {
                return Err(ProgramError::NonFinite {
                    location: format!("right-hand side {r}"),
                });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(ProgramError::NonFinite {
                location: "objective".into(),
            });
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_constant
    }

    /// Largest absolute equality residual `|A x - b|_inf`.
    pub fn eq_residual(&self, x: &[f64]) -> f64 {
        self.eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (row.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest cone violation (0 when `x` lies in every cone).
    pub fn cone_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for cone in &self.cones {
            match cone {
                Cone::NonNegative { start, len } => {
                    for v in &x[*start..start + len] {
                        worst = worst.max(-v);
                    }
                }
                Cone::SecondOrder(idx) => {
                    let t = x[idx[0]];
                    let r = idx[1..].iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
                    worst = worst.max(r - t);
                }
            }
        }
        worst
    }

    pub(crate) fn from_parts(
        names: Vec<String>,
        objective: Vec<f64>,
        objective_constant: f64,
        eq_rows: Vec<Vec<(usize, f64)>>,
        eq_rhs: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Self {
        ConicProgram {
            names,
            objective,
            objective_constant,
            eq_rows,
            eq_rhs,
            cones,
        }
    }
}
