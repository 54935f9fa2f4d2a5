//! Lowering of a [`ConicProgram`] to the solver's internal form
//!
//! ```text
//!   minimize    c'x
//!   subject to  A x = b,   G x + s = h,   s in K
//! ```
//!
//! A cone variable that appears in exactly one equality row and has no
//! objective weight is eliminated: the row `a'x_rest + a_j s_j = b` becomes
//! the conic row `(a_rest / a_j)' x_rest + s_j = b / a_j`. Every other cone
//! variable stays a decision variable and gets the row `-x_j + s_j = 0`.

use crate::program::{Cone, ConicProgram};
use nalgebra::DVector;

pub(crate) type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Block {
    Lp { start: usize, len: usize },
    Soc { start: usize, len: usize },
}

impl Block {
    pub(crate) fn start(&self) -> usize {
        match *self {
            Block::Lp { start, .. } | Block::Soc { start, .. } => start,
        }
    }

    pub(crate) fn len(&self) -> usize {
        match *self {
            Block::Lp { len, .. } | Block::Soc { len, .. } => len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarSource {
    Internal(usize),
    /// Value recovered as `s[row]`.
    Slack(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowSource {
    Kept(usize),
    /// Eliminated into conic row `row`; multiplier is `z[row] / coef`.
    Eliminated { row: usize, coef: f64 },
    Dropped,
}

#[derive(Debug, Clone)]
pub(crate) struct Standard {
    pub n: usize,
    pub c: DVector<f64>,
    pub a: Vec<SparseRow>,
    pub b: DVector<f64>,
    pub g: Vec<SparseRow>,
    pub h: DVector<f64>,
    pub blocks: Vec<Block>,
    vars: Vec<VarSource>,
    rows: Vec<RowSource>,
    /// Maps each conic row back to the program variable it holds.
    slack_owner: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PresolveOutcome {
    Ok,
    /// Equality rows are inconsistent; holds the offending program row.
    Inconsistent(usize),
}

impl Standard {
    pub(crate) fn build(prog: &ConicProgram, presolve: bool) -> (Standard, PresolveOutcome) {
        let nv = prog.num_vars();
        let rows = prog.eq_rows();
        let rhs = prog.eq_rhs();
        let obj = prog.objective();

        let mut occurrences: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        for (r, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                if a != 0.0 {
                    occurrences[j].push((r, a));
                }
            }
        }

        // Decide which cone blocks are eliminated.
        let mut row_used = vec![false; rows.len()];
        let mut eliminate: Vec<Option<Vec<(usize, f64)>>> = Vec::with_capacity(prog.cones().len());
        for cone in prog.cones() {
            let idx = cone.indices();
            let mut plan = Vec::with_capacity(idx.len());
            let mut ok = presolve;
            if ok {
                let mut claimed = Vec::new();
                for &j in &idx {
                    let occ = &occurrences[j];
                    if obj[j] != 0.0 || occ.len() != 1 || row_used[occ[0].0] || claimed.contains(&occ[0].0) {
                        ok = false;
                        break;
                    }
                    claimed.push(occ[0].0);
                    plan.push(occ[0]);
                }
            }
            if ok {
                for &(r, _) in &plan {
                    row_used[r] = true;
                }
                eliminate.push(Some(plan));
            } else {
                eliminate.push(None);
            }
        }

        let mut is_slack = vec![false; nv];
        for (cone, plan) in prog.cones().iter().zip(&eliminate) {
            if plan.is_some() {
                for j in cone.indices() {
                    is_slack[j] = true;
                }
            }
        }
        let mut internal: Vec<Option<usize>> = vec![None; nv];
        let mut n = 0;
        for j in 0..nv {
            if !is_slack[j] {
                internal[j] = Some(n);
                n += 1;
            }
        }
        let mut vars: Vec<VarSource> = internal
            .iter()
            .map(|k| VarSource::Internal(k.unwrap_or(usize::MAX)))
            .collect();
        let map_row = |row: &SparseRow, skip: Option<usize>, scale: f64| -> SparseRow {
            row.iter()
                .filter(|&&(j, a)| a != 0.0 && Some(j) != skip)
                .map(|&(j, a)| (internal[j].expect("slack referenced outside its row"), a * scale))
                .collect()
        };

        let mut c = DVector::zeros(n);
        for j in 0..nv {
            if let Some(k) = internal[j] {
                c[k] = -obj[j];
            }
        }

        let mut row_src = vec![RowSource::Dropped; rows.len()];
        let mut g: Vec<SparseRow> = Vec::new();
        let mut h: Vec<f64> = Vec::new();
        let mut blocks: Vec<Block> = Vec::new();
        let mut slack_owner = Vec::new();
        for (cone, plan) in prog.cones().iter().zip(&eliminate) {
            let start = g.len();
            let idx = cone.indices();
            for (pos, &j) in idx.iter().enumerate() {
                let grow = g.len();
                match plan {
                    Some(plan) => {
                        let (r, a) = plan[pos];
                        g.push(map_row(&rows[r], Some(j), 1.0 / a));
                        h.push(rhs[r] / a);
                        row_src[r] = RowSource::Eliminated { row: grow, coef: a };
                        vars[j] = VarSource::Slack(grow);
                    }
                    None => {
                        let k = internal[j].expect("kept cone variable");
                        g.push(vec![(k, -1.0)]);
                        h.push(0.0);
                    }
                }
                slack_owner.push(j);
            }
            let len = idx.len();
            match cone {
                Cone::NonNegative { .. } => match blocks.last_mut() {
                    Some(Block::Lp { start: s, len: l }) if *s + *l == start => *l += len,
                    _ => blocks.push(Block::Lp { start, len }),
                },
                Cone::SecondOrder(_) => blocks.push(Block::Soc { start, len }),
            }
        }

        let mut a_rows = Vec::new();
        let mut b = Vec::new();
        let mut outcome = PresolveOutcome::Ok;
        let candidates: Vec<usize> = (0..rows.len()).filter(|&r| !row_used[r]).collect();
        let keep = if presolve {
            let mapped: Vec<SparseRow> = candidates.iter().map(|&r| map_row(&rows[r], None, 1.0)).collect();
            let rhs_c: Vec<f64> = candidates.iter().map(|&r| rhs[r]).collect();
            let (keep, bad) = independent_rows(&mapped, &rhs_c, n);
            if let Some(k) = bad {
                outcome = PresolveOutcome::Inconsistent(candidates[k]);
            }
            keep
        } else {
            vec![true; candidates.len()]
        };
        for (k, &r) in candidates.iter().enumerate() {
            if keep[k] {
                row_src[r] = RowSource::Kept(a_rows.len());
                a_rows.push(map_row(&rows[r], None, 1.0));
                b.push(rhs[r]);
            }
        }

        (
            Standard {
                n,
                c,
                a: a_rows,
                b: DVector::from_vec(b),
                g,
                h: DVector::from_vec(h),
                blocks,
                vars,
                rows: row_src,
                slack_owner,
            },
            outcome,
        )
    }

    pub(crate) fn m(&self) -> usize {
        self.g.len()
    }

    pub(crate) fn p(&self) -> usize {
        self.a.len()
    }

    /// Program-space primal point from internal `x` and `s`.
    pub(crate) fn recover_x(&self, x: &DVector<f64>, s: &DVector<f64>) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| match *v {
                VarSource::Internal(k) => x[k],
                VarSource::Slack(r) => s[r],
            })
            .collect()
    }

    /// Program-space equality multipliers.
    pub(crate) fn recover_y(&self, y: &DVector<f64>, z: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match *r {
                RowSource::Kept(k) => y[k],
                RowSource::Eliminated { row, coef } => z[row] / coef,
                RowSource::Dropped => 0.0,
            })
            .collect()
    }

    /// Program-space conic multipliers, indexed by variable.
    pub(crate) fn recover_z(&self, z: &DVector<f64>, nv: usize) -> Vec<f64> {
        let mut out = vec![0.0; nv];
        for (row, &j) in self.slack_owner.iter().enumerate() {
            out[j] = z[row];
        }
        out
    }
}

/// Greedy selection of linearly independent rows by modified Gram-Schmidt
/// (two passes). Returns the keep mask and the first inconsistent row.
fn independent_rows(rows: &[SparseRow], rhs: &[f64], n: usize) -> (Vec<bool>, Option<usize>) {
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut keep = vec![false; rows.len()];
    let mut bad = None;
    for (k, row) in rows.iter().enumerate() {
        let mut v = vec![0.0; n];
        for &(j, a) in row {
            v[j] += a;
        }
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut beta = rhs[k];
        if norm0 == 0.0 {
            if beta.abs() > 1e-9 * (1.0 + rhs[k].abs()) && bad.is_none() {
                bad = Some(k);
            }
            continue;
        }
        for _ in 0..2 {
            for (q, qb) in &basis {
                let coef: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                if coef != 0.0 {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= coef * qi;
                    }
                    beta -= coef * qb;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-10 * norm0 {
            if beta.abs() > 1e-7 * (1.0 + rhs[k].abs()) && bad.is_none() {
                bad = Some(k);
            }
            continue;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push((v, beta / norm));
        keep[k] = true;
    }
    (keep, bad)
}
