use super::system::LinearSystem;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::io::Write;
use std::path::Path;

/// The polyhedron `{w : R w <= t}` obtained from `F v <= f` by eliminating the
/// network states, with `w = A1 p1 + A2 p2 + B1 q1 + B2 q2 - b` and
/// `R = F D^-1 E C^-1`.
///
/// Row `i` equals `vec(E)' H_i w` with `H_i = C^-1 (x) g_i` and
/// `g_i = (F_i D^-1)'`. `H_i` has `(6n)^2` rows and is never formed unless
/// asked for.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    pub system: LinearSystem,
    pub p2: DVector<f64>,
    pub q2: DVector<f64>,
    /// Rows are `g_i'`, i.e. `F D^-1`.
    pub g: DMatrix<f64>,
    pub t: DVector<f64>,
    /// `F D^-1 E C^-1` at the nominal impedances.
    pub r: DMatrix<f64>,
}

impl FeasibleRegion {
    pub fn new(system: LinearSystem, p2: DVector<f64>, q2: DVector<f64>) -> Result<Self> {
        if p2.len() != system.n_passive() || q2.len() != system.n_passive() {
            return Err(Error::Dimension(format!(
                "passive demand has {}/{} entries, network has {} passive customers",
                p2.len(),
                q2.len(),
                system.n_passive()
            )));
        }
        let g = &system.f * &system.d_inv;
        let t = &system.f_vec - &g * &system.d_vec;
        let r = &g * &system.e * &system.c_inv;
        Ok(FeasibleRegion {
            system,
            p2,
            q2,
            g,
            t,
            r,
        })
    }

    /// Uses the passive forecasts of the network.
    pub fn with_forecast(system: LinearSystem, net: &crate::netmodel::NetworkModel) -> Result<Self> {
        let passive: Vec<_> = net.passive_customers().collect();
        let p2 = DVector::from_iterator(passive.len(), passive.iter().map(|c| c.p_forecast));
        let q2 = DVector::from_iterator(passive.len(), passive.iter().map(|c| c.q_forecast));
        Self::new(system, p2, q2)
    }

    pub fn num_rows(&self) -> usize {
        self.t.len()
    }

    /// Dimension of `w` (and of each side of `E`).
    pub fn dim(&self) -> usize {
        self.system.c.nrows()
    }

    /// Column-major `vec(E)`.
    pub fn vec_e(&self) -> DVector<f64> {
        DVector::from_column_slice(self.system.e.as_slice())
    }

    /// `H_i w` computed as `vec(g_i (C^-1 w)')`.
    pub fn h_apply(&self, i: usize, w: &DVector<f64>) -> DVector<f64> {
        let cw = &self.system.c_inv * w;
        let gi = self.g.row(i).transpose();
        let outer = &gi * cw.transpose();
        DVector::from_column_slice(outer.as_slice())
    }

    /// Dense `H_i = C^-1 (x) g_i`.
    pub fn h_dense(&self, i: usize) -> DMatrix<f64> {
        let gi = self.g.row(i).transpose();
        self.system.c_inv.kronecker(&gi)
    }

    /// `R w` with a replacement impedance matrix.
    pub fn rows_with(&self, e: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.g * (e * (&self.system.c_inv * w))
    }

    /// Full `w` for given active powers at the stored passive demand.
    pub fn w_of(&self, p1: &DVector<f64>, q1: &DVector<f64>) -> DVector<f64> {
        self.system.injection_vector(p1, &self.p2, q1, &self.q2)
    }

    /// Largest `R w - t` over all rows (positive means outside).
    pub fn max_violation(&self, w: &DVector<f64>) -> f64 {
        (&self.r * w - &self.t).max()
    }

    pub fn contains(&self, p1: &DVector<f64>, q1: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(&self.w_of(p1, q1)) <= tol
    }

    /// Writes one line per row: the column-major entries of `H_i` followed
    /// by `t_i`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let m = self.dim();
        let io = |e| Error::io(path, e);
        writeln!(
            out,
            "# H_i is ({m}*{m}) x {m}, flattened column-major; w stacks (Re, Im) x position x phase"
        )
        .map_err(io)?;
        let mut header = String::from("row");
        for c in 0..m {
            for r in 0..m * m {
                header.push_str(&format!(",h_{r}_{c}"));
            }
        }
        header.push_str(",t");
        writeln!(out, "{header}").map_err(io)?;
        for i in 0..self.num_rows() {
            let h = self.h_dense(i);
            let mut line = i.to_string();
            for v in h.as_slice() {
                line.push_str(&format!(",{v}"));
            }
            line.push_str(&format!(",{}", self.t[i]));
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}
