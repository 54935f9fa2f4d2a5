use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Index of a real component in the stacked `(Re, Im) x position x phase`
/// vectors used for voltages and currents.
#[inline]
pub fn state_index(n: usize, part: usize, k: usize, phase: usize) -> usize {
    part * 3 * n + 3 * k + phase
}

/// Voltages that fix the denominators of the current-injection relation
/// and the direction used to linearize voltage magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v_ref: [Complex64; 3],
    /// Per topology position, per phase, in per unit.
    pub v: Vec<[Complex64; 3]>,
}

impl OperatingPoint {
    /// Every bus at the reference voltage.
    pub fn flat(net: &NetworkModel) -> Self {
        let v_ref = net.v_ref_complex();
        OperatingPoint {
            v_ref,
            v: vec![v_ref; net.n()],
        }
    }

    pub fn new(net: &NetworkModel, v: Vec<[Complex64; 3]>) -> Result<Self> {
        let op = OperatingPoint {
            v_ref: net.v_ref_complex(),
            v,
        };
        op.check(net)?;
        Ok(op)
    }

    pub fn check(&self, net: &NetworkModel) -> Result<()> {
        if self.v.len() != net.n() {
            return Err(Error::Dimension(format!(
                "operating point covers {} buses, network has {}",
                self.v.len(),
                net.n()
            )));
        }
        for (k, row) in self.v.iter().enumerate() {
            for v in row {
                let m = v.norm();
                if !(m > 0.5 && m < 1.5) {
                    return Err(Error::Argument(format!(
                        "operating-point magnitude {m:.4} p.u. at position {k} outside (0.5, 1.5)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest change in any complex voltage between two points.
    pub fn max_difference(&self, other: &OperatingPoint) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .flat_map(|(a, b)| (0..3).map(move |p| (a[p] - b[p]).norm()))
            .fold(0.0, f64::max)
    }
}

/// The linearized network model
///
/// ```text
///   A1 p1 + A2 p2 + B1 q1 + B2 q2 + C l = b
///   D v + E l = d
///   F v <= f
/// ```
///
/// with `p`, `q` in kW/kvar and `v`, `l` in per unit.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    pub s_base: f64,
    pub active: Vec<String>,
    pub passive: Vec<String>,
    pub p1_bounds: Vec<[f64; 2]>,
    pub q1_bounds: Vec<[f64; 2]>,
    /// Reactive power of active customers when it is not a decision.
    pub q1_fixed: DVector<f64>,
    pub q2_bounds: Vec<[f64; 2]>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub d_vec: DVector<f64>,
    pub f: DMatrix<f64>,
    pub f_vec: DVector<f64>,
    pub c_inv: DMatrix<f64>,
    pub d_inv: DMatrix<f64>,
    pub op: OperatingPoint,
}

/// Real expansion of the per-unit impedance of every line:
/// `E = [[R, -X], [X, R]]` in the stacked ordering.
pub fn impedance_matrix(net: &NetworkModel) -> DMatrix<f64> {
    let n = net.n();
    let mut e = DMatrix::zeros(6 * n, 6 * n);
    for k in 0..n {
        let z = net.z_pu(k);
        for phi in 0..3 {
            for psi in 0..3 {
                let (r, x) = (z[phi][psi].re, z[phi][psi].im);
                let (re_r, im_r) = (state_index(n, 0, k, phi), state_index(n, 1, k, phi));
                let (re_c, im_c) = (state_index(n, 0, k, psi), state_index(n, 1, k, psi));
                e[(re_r, re_c)] = r;
                e[(re_r, im_c)] = -x;
                e[(im_r, re_c)] = x;
                e[(im_r, im_c)] = r;
            }
        }
    }
    e
}

/// Voltage-magnitude limits linearized by projecting `V` on the unit
/// vector of the operating-point voltage. Rows: all upper bounds, then
/// all lower bounds, each ordered by (position, phase).
pub fn voltage_linearization(net: &NetworkModel, op: &OperatingPoint) -> (DMatrix<f64>, DVector<f64>) {
    let n = net.n();
    let t = net.topology();
    let mut f = DMatrix::zeros(6 * n, 6 * n);
    let mut fv = DVector::zeros(6 * n);
    for k in 0..n {
        let bus = &net.buses[t.order[k]];
        for phi in 0..3 {
            let v = op.v[k][phi];
            let u = v / v.norm();
            let row = 3 * k + phi;
            let (re, im) = (state_index(n, 0, k, phi), state_index(n, 1, k, phi));
            f[(row, re)] = u.re;
            f[(row, im)] = u.im;
            fv[row] = bus.vmax;
            f[(3 * n + row, re)] = -u.re;
            f[(3 * n + row, im)] = -u.im;
            fv[3 * n + row] = -bus.vmin;
        }
    }
    (f, fv)
}

fn invert(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Validation(format!("{what} is singular")))
}

/// Assembles the linearized model at operating point `op`.
pub fn assemble(net: &NetworkModel, op: &OperatingPoint) -> Result<LinearSystem> {
    op.check(net)?;
    let n = net.n();
    let t = net.topology();
    let s = net.base.s_kva;
    let inc = net.incidence().matrix;

    // C = blkdiag(Cbar, Cbar) (x) I3: pure connectivity.
    let mut c = DMatrix::zeros(6 * n, 6 * n);
    let mut d = DMatrix::zeros(6 * n, 6 * n);
    for part in 0..2 {
        for k in 0..n {
            for col in 0..n {
                let v = inc[(k, col)];
                if v != 0.0 {
                    for phi in 0..3 {
                        c[(state_index(n, part, k, phi), state_index(n, part, col, phi))] = v;
                        // D = Cbar' (x) I3: line `col` drops from its parent to bus `col`.
                        d[(state_index(n, part, col, phi), state_index(n, part, k, phi))] = v;
                    }
                }
            }
        }
    }
    let mut d_vec = DVector::zeros(6 * n);
    for k in 0..n {
        if t.parent[k].is_none() {
            for phi in 0..3 {
                d_vec[state_index(n, 0, k, phi)] = op.v_ref[phi].re;
                d_vec[state_index(n, 1, k, phi)] = op.v_ref[phi].im;
            }
        }
    }

    // I_load = conj(S) / conj(V) = (P - jQ)(alpha + j beta), alpha + j beta = V / |V|^2.
    let active: Vec<_> = net.active_customers().collect();
    let passive: Vec<_> = net.passive_customers().collect();
    let injection = |list: &[&crate::netmodel::Customer]| {
        let mut a = DMatrix::zeros(6 * n, list.len());
        let mut b = DMatrix::zeros(6 * n, list.len());
        for (j, cust) in list.iter().enumerate() {
            let k = net.customer_position(cust);
            let phi = cust.phase.index();
            let v = op.v[k][phi];
            let g = v / v.norm_sqr();
            let (re, im) = (state_index(n, 0, k, phi), state_index(n, 1, k, phi));
            a[(re, j)] = -g.re / s;
            a[(im, j)] = -g.im / s;
            b[(re, j)] = -g.im / s;
            b[(im, j)] = g.re / s;
        }
        (a, b)
    };
    let (a1, b1) = injection(&active);
    let (a2, b2) = injection(&passive);
    let e = impedance_matrix(net);
    let (f, f_vec) = voltage_linearization(net, op);
    let c_inv = invert(&c, "current-injection matrix C")?;
    let d_inv = invert(&d, "voltage-drop matrix D")?;
    Ok(LinearSystem {
        n,
        s_base: s,
        active: active.iter().map(|c| c.id.clone()).collect(),
        passive: passive.iter().map(|c| c.id.clone()).collect(),
        p1_bounds: active.iter().map(|c| c.p_bounds).collect(),
        q1_bounds: active.iter().map(|c| c.q_bounds).collect(),
        q1_fixed: DVector::from_iterator(active.len(), active.iter().map(|c| c.q_forecast)),
        q2_bounds: passive.iter().map(|c| c.q_bounds).collect(),
        a1,
        a2,
        b1,
        b2,
        c,
        b: DVector::zeros(6 * n),
        d,
        e,
        d_vec,
        f,
        f_vec,
        c_inv,
        d_inv,
        op: op.clone(),
    })
}

impl LinearSystem {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn n_passive(&self) -> usize {
        self.passive.len()
    }

    /// `w = A1 p1 + A2 p2 + B1 q1 + B2 q2 - b`.
    pub fn injection_vector(
        &self,
        p1: &DVector<f64>,
        p2: &DVector<f64>,
        q1: &DVector<f64>,
        q2: &DVector<f64>,
    ) -> DVector<f64> {
        &self.a1 * p1 + &self.a2 * p2 + &self.b1 * q1 + &self.b2 * q2 - &self.b
    }

    /// Line currents and voltages of the linear model for a given `w`,
    /// using impedance matrix `e`.
    pub fn state_with(&self, w: &DVector<f64>, e: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        let l = -(&self.c_inv * w);
        let v = &self.d_inv * (&self.d_vec - e * &l);
        (v, l)
    }

    pub fn state(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        self.state_with(w, &self.e)
    }

    /// Complex voltages per (position, phase) from a stacked real vector.
    pub fn voltages(&self, v: &DVector<f64>) -> Vec<[Complex64; 3]> {
        (0..self.n)
            .map(|k| {
                let mut row = [Complex64::new(0.0, 0.0); 3];
                for (phi, out) in row.iter_mut().enumerate() {
                    *out = Complex64::new(v[state_index(self.n, 0, k, phi)], v[state_index(self.n, 1, k, phi)]);
                }
                row
            })
            .collect()
    }

    /// New operating point from the linear-model voltages at a solution.
    pub fn refine_operating_point(&self, w: &DVector<f64>) -> OperatingPoint {
        let (v, _) = self.state(w);
        OperatingPoint {
            v_ref: self.op.v_ref,
            v: self.voltages(&v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bus_dimensions_and_blocks() {
        let net = NetworkModel::bundled("twobus").unwrap();
        let ls = assemble(&net, &OperatingPoint::flat(&net)).unwrap();
        assert_eq!(ls.c.shape(), (6, 6));
        assert_eq!(ls.d.shape(), (6, 6));
        assert_eq!(ls.c, DMatrix::identity(6, 6));
        let z = net.z_pu(0);
        assert!((ls.e[(0, 0)] - z[0][0].re).abs() < 1e-15);
        assert!((ls.e[(0, 3)] + z[0][0].im).abs() < 1e-15);
        assert!((ls.e[(3, 0)] - z[0][0].im).abs() < 1e-15);
        assert!((ls.e[(4, 0)] - z[1][0].im).abs() < 1e-15);
    }

    #[test]
    fn flat_projection_rows() {
        let net = NetworkModel::bundled("twobus").unwrap();
        let (f, fv) = voltage_linearization(&net, &OperatingPoint::flat(&net));
        // phase a: Re(V) <= vmax
        assert!((f[(0, 0)] - 1.0).abs() < 1e-15 && f[(0, 3)].abs() < 1e-15);
        assert_eq!(fv[0], 1.05);
        // phase b at -120 degrees
        let ang = (-120.0f64).to_radians();
        assert!((f[(1, 1)] - ang.cos()).abs() < 1e-12);
        assert!((f[(1, 4)] - ang.sin()).abs() < 1e-12);
        assert_eq!(fv[3 + 1], -0.95);
    }

    #[test]
    fn no_load_state_is_reference_voltage() {
        let net = NetworkModel::bundled("twobus").unwrap();
        let ls = assemble(&net, &OperatingPoint::flat(&net)).unwrap();
        let w = DVector::zeros(6);
        let op = ls.refine_operating_point(&w);
        assert!(op.max_difference(&OperatingPoint::flat(&net)) < 1e-15);
    }
}
