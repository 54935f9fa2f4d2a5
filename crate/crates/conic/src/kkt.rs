//! Dense solves with the scaled KKT matrix
//!
//! ```text
//!   K = [ 0  A'  G'   ]
//!       [ A  0   0    ]
//!       [ G  0  -W^2  ]
//! ```
//!
//! through the reduced quasi-definite system in `(dx, dy)` with a small
//! static regularization, followed by iterative refinement on `K` itself.

use crate::cones::NtScaling;
use crate::presolve::SparseRow;
use nalgebra::{DMatrix, DVector, LU};
use std::collections::BTreeSet;

const REGULARIZATION: f64 = 1e-9;
const REFINE_STEPS: usize = 12;

pub(crate) struct SparseMat<'a> {
    pub rows: &'a [SparseRow],
    pub ncols: usize,
}

impl SparseMat<'_> {
    pub fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum::<f64>()),
        )
    }

    pub fn mul_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for &(j, a) in r {
                    out[j] += a * yi;
                }
            }
        }
        out
    }
}

/// How the cone block of `K` is scaled.
pub(crate) enum Scaling<'a> {
    Identity,
    Nt(&'a NtScaling),
}

pub(crate) struct Kkt<'a> {
    a: SparseMat<'a>,
    g: SparseMat<'a>,
    scaling: Scaling<'a>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    p: usize,
}

pub(crate) struct KktSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl<'a> Kkt<'a> {
    pub fn factor(
        a: &'a [SparseRow],
        g: &'a [SparseRow],
        n: usize,
        blocks: &[crate::presolve::Block],
        scaling: Scaling<'a>,
    ) -> Option<Self> {
        let p = a.len();
        let mut mat = DMatrix::<f64>::zeros(n + p, n + p);
        match &scaling {
            Scaling::Identity => {
                for row in g {
                    add_outer(&mut mat, row, row, 1.0);
                }
            }
            Scaling::Nt(w) => {
                for (k, blk) in blocks.iter().enumerate() {
                    let (start, winv2) = w.inv_sq_block(k);
                    debug_assert_eq!(start, blk.start());
                    let len = blk.len();
                    if matches!(blk, crate::presolve::Block::Lp { .. }) {
                        for i in 0..len {
                            let row = &g[start + i];
                            add_outer(&mut mat, row, row, winv2[(i, i)]);
                        }
                    } else {
                        add_block(&mut mat, &g[start..start + len], &winv2);
                    }
                }
            }
        }
        for j in 0..n {
            mat[(j, j)] += REGULARIZATION;
        }
        for (i, row) in a.iter().enumerate() {
            for &(j, v) in row {
                mat[(n + i, j)] += v;
                mat[(j, n + i)] += v;
            }
            mat[(n + i, n + i)] -= REGULARIZATION;
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let lu = mat.lu();
        Some(Kkt {
            a: SparseMat { rows: a, ncols: n },
            g: SparseMat { rows: g, ncols: n },
            scaling,
            lu,
            n,
            p,
        })
    }

    fn w_sq(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.scaling {
            Scaling::Identity => v.clone(),
            Scaling::Nt(w) => w.apply_sq(v),
        }
    }

    fn w_inv_sq(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.scaling {
            Scaling::Identity => v.clone(),
            Scaling::Nt(w) => w.apply_inv(&w.apply_inv(v)),
        }
    }

    fn reduced_solve(&self, rx: &DVector<f64>, ry: &DVector<f64>, rz: &DVector<f64>) -> Option<KktSolution> {
        // dz = W^-2 (G dx - rz);  A' dy + G' W^-2 G dx = rx + G' W^-2 rz
        let winv_rz = self.w_inv_sq(rz);
        let top = rx + self.g.mul_t(&winv_rz);
        let mut rhs = DVector::zeros(self.n + self.p);
        rhs.rows_mut(0, self.n).copy_from(&top);
        rhs.rows_mut(self.n, self.p).copy_from(ry);
        let sol = self.lu.solve(&rhs)?;
        let x = sol.rows(0, self.n).into_owned();
        let y = sol.rows(self.n, self.p).into_owned();
        let z = self.w_inv_sq(&(self.g.mul(&x) - rz));
        Some(KktSolution { x, y, z })
    }

    /// Solves `K [x; y; z] = [rx; ry; rz]`.
    pub fn solve(&self, rx: &DVector<f64>, ry: &DVector<f64>, rz: &DVector<f64>) -> Option<KktSolution> {
        let mut sol = self.reduced_solve(rx, ry, rz)?;
        let scale = 1.0 + rx.amax().max(ry.amax()).max(rz.amax());
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let ex = rx - (self.a.mul_t(&sol.y) + self.g.mul_t(&sol.z));
            let ey = ry - self.a.mul(&sol.x);
            let ez = rz - (self.g.mul(&sol.x) - self.w_sq(&sol.z));
            let err = ex.amax().max(ey.amax()).max(ez.amax());
            if !err.is_finite() {
                return None;
            }
            if err <= 1e-14 * scale || err >= 0.5 * last {
                break;
            }
            last = err;
            let corr = self.reduced_solve(&ex, &ey, &ez)?;
            sol.x += corr.x;
            sol.y += corr.y;
            sol.z += corr.z;
        }
        Some(sol)
    }
}

fn add_outer(mat: &mut DMatrix<f64>, r1: &SparseRow, r2: &SparseRow, w: f64) {
    if w == 0.0 {
        return;
    }
    for &(i, a) in r1 {
        for &(j, b) in r2 {
            mat[(i, j)] += w * a * b;
        }
    }
}

/// Adds `G_b' V G_b` for a block of rows through their joint column support.
fn add_block(mat: &mut DMatrix<f64>, rows: &[SparseRow], v: &DMatrix<f64>) {
    let support: Vec<usize> = rows
        .iter()
        .flat_map(|r| r.iter().map(|t| t.0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |j: usize| support.binary_search(&j).expect("column in support");
    let mut gd = DMatrix::<f64>::zeros(rows.len(), support.len());
    for (i, r) in rows.iter().enumerate() {
        for &(j, a) in r {
            gd[(i, pos(j))] += a;
        }
    }
    let prod = gd.transpose() * v * &gd;
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            mat[(ja, jb)] += prod[(a, b)];
        }
    }
}
