use super::ball::{AffineNormBall, BallSet};
use super::impedance::{Coupling, EntrySelection, ImpedanceParams};
use crate::error::{Error, Result};
use crate::lintopf::impedance_matrix;
use crate::netmodel::NetworkModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rdoe_conic::NormKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

const TWOBUS_UNCERTAINTY: &str = include_str!("../../data/twobus-uncertainty.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    /// `"nominal"`: the network's own values.
    Named(String),
    Vector(Vec<f64>),
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::Named("nominal".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    /// `"diag-of-center"` or `"identity"`.
    Named(String),
    /// Row-major matrix.
    Matrix(Vec<Vec<f64>>),
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Named("diag-of-center".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    #[serde(default)]
    pub center: CenterSpec,
    #[serde(default)]
    pub map: MapSpec,
    pub radius: f64,
    pub norm: NormKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    #[serde(flatten)]
    pub ball: BallSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_ball: Option<BallSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamSpec {
    /// Line ids; all lines when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<Vec<String>>,
    #[serde(default)]
    pub entries: EntrySelection,
    #[serde(default)]
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSpec {
    #[serde(default)]
    pub parameters: ParamSpec,
    #[serde(flatten)]
    pub set: ComponentSpec,
}

/// File form of an uncertainty model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct UncertaintySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impedance: Option<ImpedanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<ComponentSpec>,
}

impl UncertaintySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("uncertainty file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "twobus" => Self::from_json(TWOBUS_UNCERTAINTY),
            other => Err(Error::Argument(format!("no bundled uncertainty named '{other}'"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("uncertainty spec serializes")
    }

    pub fn component_mut(&mut self, c: Component) -> Option<&mut ComponentSpec> {
        match c {
            Component::Impedance => self.impedance.as_mut().map(|s| &mut s.set),
            Component::P2 => self.p2.as_mut(),
            Component::Q2 => self.q2.as_mut(),
        }
    }

    pub fn resolve(&self, net: &NetworkModel) -> Result<UncertaintyModel> {
        let impedance = match &self.impedance {
            None => None,
            Some(s) => {
                let e = impedance_matrix(net);
                let params = ImpedanceParams::new(
                    net,
                    &e,
                    s.parameters.lines.as_deref(),
                    s.parameters.entries,
                    s.parameters.coupling,
                )?;
                let set = resolve_set(&s.set, &params.nominal, "impedance")?;
                Some(ImpedanceUncertainty { params, set })
            }
        };
        let passive: Vec<_> = net.passive_customers().collect();
        let p2_nom = DVector::from_iterator(passive.len(), passive.iter().map(|c| c.p_forecast));
        let q2_nom = DVector::from_iterator(passive.len(), passive.iter().map(|c| c.q_forecast));
        let demand = |spec: &Option<ComponentSpec>, nom: &DVector<f64>, what: &str| -> Result<Option<BallSet>> {
            match spec {
                None => Ok(None),
                Some(_) if nom.is_empty() => Err(Error::Uncertainty(format!(
                    "{what} uncertainty given but the network has no passive customers"
                ))),
                Some(s) => resolve_set(s, nom, what).map(Some),
            }
        };
        Ok(UncertaintyModel {
            impedance,
            p2: demand(&self.p2, &p2_nom, "p2")?,
            q2: demand(&self.q2, &q2_nom, "q2")?,
        })
    }
}

fn resolve_ball(spec: &BallSpec, nominal: &DVector<f64>, what: &str) -> Result<AffineNormBall> {
    let center = match &spec.center {
        CenterSpec::Named(s) if s == "nominal" => nominal.clone(),
        CenterSpec::Named(s) => return Err(Error::Uncertainty(format!("{what}: unknown center '{s}'"))),
        CenterSpec::Vector(v) => {
            if v.len() != nominal.len() {
                return Err(Error::Dimension(format!(
                    "{what}: center has {} entries, expected {}",
                    v.len(),
                    nominal.len()
                )));
            }
            DVector::from_column_slice(v)
        }
    };
    let map = match &spec.map {
        MapSpec::Named(s) if s == "diag-of-center" => DMatrix::from_diagonal(&center),
        MapSpec::Named(s) if s == "identity" => DMatrix::identity(center.len(), center.len()),
        MapSpec::Named(s) => return Err(Error::Uncertainty(format!("{what}: unknown map '{s}'"))),
        MapSpec::Matrix(rows) => {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.len() != center.len() || rows.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension(format!(
                    "{what}: map must have {} rows of equal length",
                    center.len()
                )));
            }
            DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
        }
    };
    AffineNormBall::new(center, map, spec.radius, spec.norm)
        .map_err(|e| Error::Uncertainty(format!("{what}: {e}")))
}

fn resolve_set(spec: &ComponentSpec, nominal: &DVector<f64>, what: &str) -> Result<BallSet> {
    let mut balls = vec![resolve_ball(&spec.ball, nominal, what)?];
    if let Some(b) = &spec.second_ball {
        balls.push(resolve_ball(b, nominal, what)?);
    }
    BallSet::new(balls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Impedance,
    P2,
    Q2,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Impedance => "impedance",
            Component::P2 => "p2",
            Component::Q2 => "q2",
        })
    }
}

impl FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impedance" | "E" | "e" => Ok(Component::Impedance),
            "p2" => Ok(Component::P2),
            "q2" => Ok(Component::Q2),
            _ => Err(Error::Argument(format!("unknown uncertainty component '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceUncertainty {
    pub params: ImpedanceParams,
    pub set: BallSet,
}

/// Uncertainty in line impedances and passive demand, each an intersection
/// of at most two affine norm balls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UncertaintyModel {
    pub impedance: Option<ImpedanceUncertainty>,
    pub p2: Option<BallSet>,
    pub q2: Option<BallSet>,
}

impl UncertaintyModel {
    pub fn set(&self, c: Component) -> Option<&BallSet> {
        match c {
            Component::Impedance => self.impedance.as_ref().map(|i| &i.set),
            Component::P2 => self.p2.as_ref(),
            Component::Q2 => self.q2.as_ref(),
        }
    }

    fn require(&self, c: Component) -> Result<&BallSet> {
        self.set(c)
            .ok_or_else(|| Error::Uncertainty(format!("no {c} uncertainty in the model")))
    }

    pub fn membership(&self, c: Component, value: &DVector<f64>) -> Result<bool> {
        self.require(c)?.contains(value)
    }

    pub fn sample<R: Rng + ?Sized>(&self, c: Component, rng: &mut R) -> Result<DVector<f64>> {
        self.require(c)?.sample(rng)
    }

    /// Every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(UncertaintyModel {
            impedance: match &self.impedance {
                Some(i) => Some(ImpedanceUncertainty {
                    params: i.params.clone(),
                    set: i.set.scaled(factor)?,
                }),
                None => None,
            },
            p2: self.p2.as_ref().map(|s| s.scaled(factor)).transpose()?,
            q2: self.q2.as_ref().map(|s| s.scaled(factor)).transpose()?,
        })
    }
}
