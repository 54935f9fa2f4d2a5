//! Cone arithmetic for the product of nonnegative orthants and
//! second-order cones: Jordan products, Nesterov-Todd scalings and
//! step-to-boundary computations.

use crate::presolve::Block;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    pub blocks: Vec<Block>,
    pub m: usize,
}

fn soc_det(v: &[f64]) -> f64 {
    let r2: f64 = v[1..].iter().map(|x| x * x).sum();
    v[0] * v[0] - r2
}

impl ConeSet {
    pub fn new(blocks: Vec<Block>, m: usize) -> Self {
        ConeSet { blocks, m }
    }

    /// Barrier degree: one per orthant coordinate, one per second-order cone.
    pub fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Lp { len, .. } => *len,
                Block::Soc { .. } => 1,
            })
            .sum()
    }

    pub fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.m);
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => e.rows_mut(start, len).fill(1.0),
                Block::Soc { start, .. } => e[start] = 1.0,
            }
        }
        e
    }

    /// Smallest `a` with `v + a e` on the cone boundary (negative when `v` is interior).
    pub fn boundary_shift(&self, v: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => {
                    for i in start..start + len {
                        worst = worst.max(-v[i]);
                    }
                }
                Block::Soc { start, len } => {
                    let x = v.rows(start, len);
                    let r = x.rows(1, len - 1).norm();
                    worst = worst.max(r - x[0]);
                }
            }
        }
        worst
    }

    /// Moves `v` strictly inside the cone if it is not already.
    pub fn push_inside(&self, v: &mut DVector<f64>) {
        if self.m == 0 {
            return;
        }
        let a = self.boundary_shift(v);
        if a >= 0.0 {
            *v += self.identity() * (1.0 + a);
        }
    }

    /// Largest `a >= 0` with `v + a dv` in the cone (may be infinite).
    pub fn max_step(&self, v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => {
                    for i in start..start + len {
                        if dv[i] < 0.0 {
                            alpha = alpha.min(-v[i] / dv[i]);
                        }
                    }
                }
                Block::Soc { start, len } => {
                    let x = v.as_slice()[start..start + len].to_vec();
                    let d = &dv.as_slice()[start..start + len];
                    alpha = alpha.min(soc_step(&x, d));
                }
            }
        }
        alpha.max(0.0)
    }

    pub fn jordan(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => {
                    for i in start..start + len {
                        out[i] = u[i] * v[i];
                    }
                }
                Block::Soc { start, len } => {
                    let (u0, v0) = (u[start], v[start]);
                    out[start] = u.rows(start, len).dot(&v.rows(start, len));
                    for i in start + 1..start + len {
                        out[i] = u0 * v[i] + v0 * u[i];
                    }
                }
            }
        }
        out
    }

    /// Solves `lambda o x = v` for `x`, with `lambda` in the cone interior.
    pub fn jordan_solve(&self, lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => {
                    for i in start..start + len {
                        out[i] = v[i] / lambda[i];
                    }
                }
                Block::Soc { start, len } => {
                    let l = &lambda.as_slice()[start..start + len];
                    let det = soc_det(l);
                    let l1v1: f64 = (1..len).map(|k| l[k] * v[start + k]).sum();
                    let x0 = (l[0] * v[start] - l1v1) / det;
                    out[start] = x0;
                    for k in 1..len {
                        out[start + k] = (v[start + k] - x0 * l[k]) / l[0];
                    }
                }
            }
        }
        out
    }

    /// Nesterov-Todd scaling with `W z = W^-1 s`. `None` if either point
    /// is not strictly interior.
    pub fn nt_scaling(&self, s: &DVector<f64>, z: &DVector<f64>) -> Option<NtScaling> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            match *b {
                Block::Lp { start, len } => {
                    let mut d = Vec::with_capacity(len);
                    for i in start..start + len {
                        if !(s[i] > 0.0 && z[i] > 0.0) {
                            return None;
                        }
                        d.push((s[i] / z[i]).sqrt());
                    }
                    blocks.push(NtBlock::Lp { start, d });
                }
                Block::Soc { start, len } => {
                    let sv = &s.as_slice()[start..start + len];
                    let zv = &z.as_slice()[start..start + len];
                    let (sd, zd) = (soc_det(sv), soc_det(zv));
                    if !(sd > 0.0 && zd > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sd.sqrt(), zd.sqrt());
                    let sb: Vec<f64> = sv.iter().map(|x| x / sn).collect();
                    let zb: Vec<f64> = zv.iter().map(|x| x / zn).collect();
                    let dot: f64 = sb.iter().zip(&zb).map(|(a, b)| a * b).sum();
                    let gamma = ((1.0 + dot) / 2.0).sqrt();
                    let mut w = vec![0.0; len];
                    w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                    for k in 1..len {
                        w[k] = (sb[k] - zb[k]) / (2.0 * gamma);
                    }
                    let beta = (sn / zn).sqrt();
                    blocks.push(NtBlock::Soc { start, beta, w });
                }
            }
        }
        Some(NtScaling { m: self.m, blocks })
    }
}

/// Largest step keeping `x + a d` in a second-order cone, `x` interior.
fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    let qa = soc_det(d);
    let qb = x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum::<f64>();
    let qc = soc_det(x).max(0.0);
    // det(x + a d) = qa a^2 + 2 qb a + qc
    let mut best = f64::INFINITY;
    let mut consider = |r: f64| {
        if r.is_finite() && r >= 0.0 {
            best = best.min(r);
        }
    };
    if qa.abs() <= 1e-300 {
        if qb < 0.0 {
            consider(-qc / (2.0 * qb));
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(qb + qb.signum() * sq);
            if q != 0.0 {
                consider(qc / q);
                consider(q / qa);
            } else {
                consider(0.0);
            }
        }
    }
    // The leading coordinate must not change sign through the apex.
    if d[0] < 0.0 && x[0] + best * d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    best
}

#[derive(Debug, Clone)]
pub(crate) enum NtBlock {
    /// `W = diag(d)`, `d = sqrt(s / z)`.
    Lp { start: usize, d: Vec<f64> },
    /// `W = beta * M(w)` with `w' J w = 1` and
    /// `M(w) = [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]]`.
    Soc { start: usize, beta: f64, w: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    m: usize,
    pub blocks: Vec<NtBlock>,
}

fn hyperbolic(w: &[f64], v: &[f64], out: &mut [f64], scale: f64, flip: bool) {
    // flip selects M(Jw) = M(w)^-1
    let sign = if flip { -1.0 } else { 1.0 };
    let w0 = w[0];
    let zeta: f64 = sign * w[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>();
    out[0] = scale * (w0 * v[0] + zeta);
    let coef = v[0] + zeta / (1.0 + w0);
    for k in 1..w.len() {
        out[k] = scale * (v[k] + coef * sign * w[k]);
    }
}

impl NtScaling {
    fn apply_power(&self, v: &DVector<f64>, power: i32) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for b in &self.blocks {
            match b {
                NtBlock::Lp { start, d } => {
                    for (k, dk) in d.iter().enumerate() {
                        out[start + k] = v[start + k] * dk.powi(power);
                    }
                }
                NtBlock::Soc { start, beta, w } => {
                    let len = w.len();
                    let src = &v.as_slice()[*start..start + len];
                    let mut buf = src.to_vec();
                    let mut tmp = vec![0.0; len];
                    let steps = power.unsigned_abs();
                    for _ in 0..steps {
                        let scale = if power > 0 { *beta } else { 1.0 / beta };
                        hyperbolic(w, &buf, &mut tmp, scale, power < 0);
                        buf.copy_from_slice(&tmp);
                    }
                    out.as_mut_slice()[*start..start + len].copy_from_slice(&buf);
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_power(v, 1)
    }

    pub fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_power(v, -1)
    }

    pub fn apply_sq(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_power(v, 2)
    }

    /// Dense `W^-2` restricted to one block, together with the block's start.
    pub fn inv_sq_block(&self, k: usize) -> (usize, DMatrix<f64>) {
        match &self.blocks[k] {
            NtBlock::Lp { start, d } => {
                let diag = DVector::from_iterator(d.len(), d.iter().map(|x| 1.0 / (x * x)));
                (*start, DMatrix::from_diagonal(&diag))
            }
            NtBlock::Soc { start, beta, w } => {
                let len = w.len();
                // W^-2 = (2 Jw (Jw)' - J) / beta^2
                let mut jw = DVector::from_column_slice(w);
                for k in 1..len {
                    jw[k] = -jw[k];
                }
                let mut mat = &jw * jw.transpose() * 2.0;
                mat[(0, 0)] -= 1.0;
                for k in 1..len {
                    mat[(k, k)] += 1.0;
                }
                (*start, mat / (beta * beta))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc3() -> ConeSet {
        ConeSet::new(vec![Block::Lp { start: 0, len: 2 }, Block::Soc { start: 2, len: 3 }], 5)
    }

    #[test]
    fn nt_scaling_maps_z_to_inverse_image_of_s() {
        let k = soc3();
        let s = DVector::from_vec(vec![0.5, 2.0, 3.0, 1.0, -2.0]);
        let z = DVector::from_vec(vec![1.5, 0.1, 2.0, -0.5, 0.3]);
        let w = k.nt_scaling(&s, &z).unwrap();
        let lhs = w.apply(&z);
        let rhs = w.apply_inv(&s);
        assert!((lhs - rhs).norm() < 1e-12);
        let back = w.apply_inv(&w.apply(&s));
        assert!((back - &s).norm() < 1e-12);
    }

    #[test]
    fn inv_sq_block_matches_two_inverse_applications() {
        let k = soc3();
        let s = DVector::from_vec(vec![0.5, 2.0, 3.0, 1.0, -2.0]);
        let z = DVector::from_vec(vec![1.5, 0.1, 2.0, -0.5, 0.3]);
        let w = k.nt_scaling(&s, &z).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.0, 0.7, 0.2, 0.9]);
        let twice = w.apply_inv(&w.apply_inv(&v));
        for b in 0..2 {
            let (start, m) = w.inv_sq_block(b);
            let len = m.nrows();
            let part = &m * v.rows(start, len);
            assert!((part - twice.rows(start, len)).norm() < 1e-12);
        }
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let k = soc3();
        let l = DVector::from_vec(vec![1.0, 2.0, 3.0, 0.5, -1.0]);
        let v = DVector::from_vec(vec![0.2, -0.4, 1.0, 2.0, 3.0]);
        let x = k.jordan_solve(&l, &v);
        assert!((k.jordan(&l, &x) - v).norm() < 1e-12);
    }

    #[test]
    fn step_to_boundary() {
        let k = soc3();
        let v = DVector::from_vec(vec![1.0, 1.0, 2.0, 0.0, 0.0]);
        let dv = DVector::from_vec(vec![-1.0, 0.0, 0.0, 1.0, 0.0]);
        let a = k.max_step(&v, &dv);
        assert!((a - 1.0).abs() < 1e-12);
        let dv = DVector::from_vec(vec![0.0, 0.0, -1.0, 0.0, 0.0]);
        assert!((k.max_step(&v, &dv) - 2.0).abs() < 1e-12);
        let dv = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((k.max_step(&v, &dv) - 2.0).abs() < 1e-12);
        let dv = DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(k.max_step(&v, &dv).is_infinite());
    }

    #[test]
    fn push_inside_reaches_interior() {
        let k = soc3();
        let mut v = DVector::from_vec(vec![-1.0, 0.5, 0.0, 3.0, 4.0]);
        k.push_inside(&mut v);
        assert!(k.boundary_shift(&v) < 0.0);
    }
}
