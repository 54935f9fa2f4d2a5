use crate::error::{Error, Result};
use crate::lintopf::state_index;
use crate::netmodel::{NetworkModel, Phase};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Which entries of each selected line's impedance matrix are uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EntrySelection {
    /// Off-diagonal (phase-to-phase) terms.
    #[default]
    Mutual,
    /// Diagonal terms.
    #[serde(rename = "self")]
    SelfTerms,
    All,
}

/// How uncertain entries of `E` are tied to parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// One parameter per line, unordered phase pair and R or X, so that the
    /// perturbed `E` is still the real expansion of a symmetric impedance.
    #[default]
    Physical,
    /// Every nonzero selected entry of `E` varies on its own.
    Entrywise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    R,
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDescriptor {
    pub line: String,
    pub phases: (char, char),
    /// `R` or `X` for physical parameters; `None` for a raw entry of `E`.
    pub part: Option<Part>,
    pub nominal_pu: f64,
}

/// `vec(E) = e_fix + G theta`, stored sparsely as the entries each parameter
/// touches.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceParams {
    pub descriptors: Vec<ParamDescriptor>,
    /// `(row, col, coef)` of `E` per parameter.
    pub positions: Vec<Vec<(usize, usize, f64)>>,
    pub nominal: DVector<f64>,
    pub coupling: Coupling,
    dim: usize,
}

impl ImpedanceParams {
    /// `lines = None` selects every line.
    pub fn new(
        net: &NetworkModel,
        e: &DMatrix<f64>,
        lines: Option<&[String]>,
        entries: EntrySelection,
        coupling: Coupling,
    ) -> Result<Self> {
        let n = net.n();
        let t = net.topology();
        let positions_of: Vec<usize> = match lines {
            None => (0..n).collect(),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    let li = net
                        .line_index(id)
                        .ok_or_else(|| Error::Uncertainty(format!("unknown line '{id}'")))?;
                    Ok(t.line.iter().position(|&l| l == li).expect("every line has a position"))
                })
                .collect::<Result<_>>()?,
        };
        let pair_selected = |phi: usize, psi: usize| match entries {
            EntrySelection::Mutual => phi != psi,
            EntrySelection::SelfTerms => phi == psi,
            EntrySelection::All => true,
        };
        let mut descriptors = Vec::new();
        let mut positions = Vec::new();
        let mut nominal = Vec::new();
        for &k in &positions_of {
            let line_id = net.lines[t.line[k]].id.clone();
            let z = net.z_pu(k);
            let idx = |part, phase| state_index(n, part, k, phase);
            for phi in 0..3 {
                for psi in phi..3 {
                    if !pair_selected(phi, psi) {
                        continue;
                    }
                    let phases = (Phase::from_index(phi).label(), Phase::from_index(psi).label());
                    match coupling {
                        Coupling::Physical => {
                            let mut r_pos = vec![(idx(0, phi), idx(0, psi), 1.0), (idx(1, phi), idx(1, psi), 1.0)];
                            let mut x_pos = vec![(idx(1, phi), idx(0, psi), 1.0), (idx(0, phi), idx(1, psi), -1.0)];
                            if phi != psi {
                                r_pos.push((idx(0, psi), idx(0, phi), 1.0));
                                r_pos.push((idx(1, psi), idx(1, phi), 1.0));
                                x_pos.push((idx(1, psi), idx(0, phi), 1.0));
                                x_pos.push((idx(0, psi), idx(1, phi), -1.0));
                            }
                            for (part, pos, val) in [(Part::R, r_pos, z[phi][psi].re), (Part::X, x_pos, z[phi][psi].im)] {
                                if val == 0.0 {
                                    continue;
                                }
                                descriptors.push(ParamDescriptor {
                                    line: line_id.clone(),
                                    phases,
                                    part: Some(part),
                                    nominal_pu: val,
                                });
                                positions.push(pos);
                                nominal.push(val);
                            }
                        }
                        Coupling::Entrywise => {
                            let mut cells = Vec::new();
                            for (a, b) in [(phi, psi), (psi, phi)] {
                                for pa in 0..2 {
                                    for pb in 0..2 {
                                        cells.push((idx(pa, a), idx(pb, b)));
                                    }
                                }
                                if phi == psi {
                                    break;
                                }
                            }
                            for (r, c) in cells {
                                let val = e[(r, c)];
                                if val == 0.0 {
                                    continue;
                                }
                                descriptors.push(ParamDescriptor {
                                    line: line_id.clone(),
                                    phases,
                                    part: None,
                                    nominal_pu: val,
                                });
                                positions.push(vec![(r, c, 1.0)]);
                                nominal.push(val);
                            }
                        }
                    }
                }
            }
        }
        if descriptors.is_empty() {
            return Err(Error::Uncertainty("no uncertain impedance entries selected".into()));
        }
        Ok(ImpedanceParams {
            descriptors,
            positions,
            nominal: DVector::from_vec(nominal),
            coupling,
            dim: e.nrows(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `E` with the parameters set to `theta` (everything else nominal).
    pub fn apply(&self, e_nominal: &DMatrix<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut e = e_nominal.clone();
        for (j, pos) in self.positions.iter().enumerate() {
            let delta = theta[j] - self.nominal[j];
            for &(r, c, coef) in pos {
                e[(r, c)] += coef * delta;
            }
        }
        e
    }

    /// `E` with every parameter removed.
    pub fn fixed_part(&self, e_nominal: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(e_nominal, &DVector::zeros(self.len()))
    }

    /// Dense `G` with `vec(E) = e_fix + G theta` (column-major `vec`).
    pub fn g_matrix(&self) -> DMatrix<f64> {
        let m = self.dim;
        let mut g = DMatrix::zeros(m * m, self.len());
        for (j, pos) in self.positions.iter().enumerate() {
            for &(r, c, coef) in pos {
                g[(c * m + r, j)] += coef;
            }
        }
        g
    }

    /// `K = G' H_i` for the row with `g_i` and the given `C^-1`, so that the
    /// parameter-dependent part of row `i` is `theta' K w`.
    pub fn k_matrix(&self, g_row: &[f64], c_inv: &DMatrix<f64>) -> DMatrix<f64> {
        let m = c_inv.ncols();
        let mut k = DMatrix::zeros(self.len(), m);
        for (j, pos) in self.positions.iter().enumerate() {
            for &(r, c, coef) in pos {
                let s = coef * g_row[r];
                if s != 0.0 {
                    for col in 0..m {
                        k[(j, col)] += s * c_inv[(c, col)];
                    }
                }
            }
        }
        k
    }

    /// Network whose line impedances carry `theta` (physical coupling only).
    pub fn apply_to_network(&self, net: &NetworkModel, theta: &DVector<f64>) -> Result<NetworkModel> {
        if self.coupling != Coupling::Physical {
            return Err(Error::Unsupported(
                "entrywise impedance perturbations have no physical line model".into(),
            ));
        }
        let zb = net.base.z_ohm();
        let mut out = net.clone();
        for (j, d) in self.descriptors.iter().enumerate() {
            let li = out.line_index(&d.line).expect("descriptor line exists");
            let phi = phase_index(d.phases.0);
            let psi = phase_index(d.phases.1);
            let part = match d.part {
                Some(Part::R) => 0,
                _ => 1,
            };
            out.lines[li].z[phi][psi][part] = theta[j] * zb;
            out.lines[li].z[psi][phi][part] = theta[j] * zb;
        }
        out.validate()?;
        Ok(out)
    }
}

fn phase_index(label: char) -> usize {
    match label {
        'a' => 0,
        'b' => 1,
        _ => 2,
    }
}
