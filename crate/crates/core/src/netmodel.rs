//! Unbalanced radial distribution networks and their customers.
//!
//! Networks are read from the `utopf-net/1` JSON format:
//!
//! ```json
//! {
//!   "format": "utopf-net/1",
//!   "name": "twobus",
//!   "base": { "s_kva": 10.0, "v_volt": 230.0 },
//!   "v_ref": [ { "mag": 1.0, "angle_deg": 0.0 }, ... ],
//!   "buses": [ { "id": "1", "vmin": 0.95, "vmax": 1.05, "reference": true, "phases": "abc" } ],
//!   "lines": [ { "id": "12", "from": "1", "to": "2", "z": [[[r, x], [r, x], [r, x]], ...] } ],
//!   "customers": [ { "id": "1", "bus": "2", "phase": "a", "kind": "active",
//!                    "p_bounds": [-7, 7], "q_bounds": [-1, 1] } ]
//! }
//! ```
//!
//! `s_kva` is the per-phase power base and `v_volt` the phase-to-neutral
//! voltage base. Impedances are in ohms, powers in kW/kvar with consumption
//! positive. Passive customers carry `p_forecast`/`q_forecast`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

pub const FORMAT_TAG: &str = "utopf-net/1";

const TWOBUS_JSON: &str = include_str!("../data/twobus.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    pub fn label(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Non-empty subset of {a, b, c}; written as a string such as `"abc"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn new(phases: &[Phase]) -> Result<Self> {
        let mut bits = 0u8;
        for p in phases {
            let bit = 1 << p.index();
            if bits & bit != 0 {
                return Err(Error::Validation(format!("phase {p} listed twice")));
            }
            bits |= bit;
        }
        if bits == 0 {
            return Err(Error::Validation("empty phase set".into()));
        }
        Ok(PhaseSet(bits))
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.label())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PhaseSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let phases = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'a' => Ok(Phase::A),
                'b' => Ok(Phase::B),
                'c' => Ok(Phase::C),
                other => Err(Error::Validation(format!("unknown phase '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PhaseSet::new(&phases)
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_phases() -> PhaseSet {
    PhaseSet::ABC
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub s_kva: f64,
    pub v_volt: f64,
}

impl Base {
    pub fn z_ohm(&self) -> f64 {
        self.v_volt * self.v_volt / (self.s_kva * 1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorSpec {
    pub mag: f64,
    pub angle_deg: f64,
}

impl PhasorSpec {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.mag, self.angle_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub vmin: f64,
    pub vmax: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reference: bool,
    #[serde(default = "default_phases")]
    pub phases: PhaseSet,
}

/// 3x3 series impedance in ohms, stored as `[re, im]` pairs.
pub type ZMatrix = [[[f64; 2]; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    pub z: ZMatrix,
}

impl Line {
    pub fn z_ohm(&self, phi: usize, psi: usize) -> Complex64 {
        let [re, im] = self.z[phi][psi];
        Complex64::new(re, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomerKind {
    Active,
    Passive,
}

fn default_p_bounds() -> [f64; 2] {
    [-7.0, 7.0]
}

fn default_q_bounds() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: String,
    pub bus: String,
    pub phase: Phase,
    pub kind: CustomerKind,
    #[serde(default = "default_p_bounds")]
    pub p_bounds: [f64; 2],
    #[serde(default = "default_q_bounds")]
    pub q_bounds: [f64; 2],
    #[serde(default)]
    pub p_forecast: f64,
    #[serde(default)]
    pub q_forecast: f64,
}

/// Ordering derived from a breadth-first search from the reference bus.
///
/// Non-reference buses are numbered `0..n` in BFS order with children
/// visited by ascending id, so the numbering does not depend on file order.
/// Position `k` also names the line joining bus `k` to its parent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub reference: usize,
    /// Network bus index at each position.
    pub order: Vec<usize>,
    /// Position of each network bus (`None` for the reference).
    pub position: Vec<Option<usize>>,
    /// Parent position (`None` when the parent is the reference bus).
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Network line index feeding each position.
    pub line: Vec<usize>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Positions on the path from bus `k` up to (excluding) the reference.
    pub fn path_to_reference(&self, k: usize) -> Vec<usize> {
        let mut out = vec![k];
        let mut cur = k;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub format: String,
    #[serde(default)]
    pub name: String,
    pub base: Base,
    pub v_ref: [PhasorSpec; 3],
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub customers: Vec<Customer>,
    #[serde(skip)]
    topology: Topology,
}

/// Node-line incidence of the radial tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    /// Rows: non-reference buses; columns: lines; both in topology order.
    pub matrix: nalgebra::DMatrix<f64>,
    pub bus_ids: Vec<String>,
    pub line_ids: Vec<String>,
}

impl NetworkModel {
    /// Validates the raw fields and computes the topology.
    pub fn new(
        name: impl Into<String>,
        base: Base,
        v_ref: [PhasorSpec; 3],
        buses: Vec<Bus>,
        lines: Vec<Line>,
        customers: Vec<Customer>,
    ) -> Result<Self> {
        let mut net = NetworkModel {
            format: FORMAT_TAG.into(),
            name: name.into(),
            base,
            v_ref,
            buses,
            lines,
            customers,
            topology: Topology::default(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut net: NetworkModel =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network file: {e}")))?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Networks shipped with the crate, addressed by name.
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "twobus" => Self::from_json(TWOBUS_JSON),
            other => Err(Error::Argument(format!("no bundled network named '{other}'"))),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Number of non-reference buses.
    pub fn n(&self) -> usize {
        self.topology.len()
    }

    pub fn v_ref_complex(&self) -> [Complex64; 3] {
        [
            self.v_ref[0].to_complex(),
            self.v_ref[1].to_complex(),
            self.v_ref[2].to_complex(),
        ]
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn active_customers(&self) -> impl Iterator<Item = &Customer> {
        self.customers.iter().filter(|c| c.kind == CustomerKind::Active)
    }

    pub fn passive_customers(&self) -> impl Iterator<Item = &Customer> {
        self.customers.iter().filter(|c| c.kind == CustomerKind::Passive)
    }

    /// Topology position of a customer's bus.
    pub fn customer_position(&self, c: &Customer) -> usize {
        let b = self.bus_index(&c.bus).expect("validated customer bus");
        self.topology.position[b].expect("customers sit on non-reference buses")
    }

    /// Line impedance in per unit for the line at topology position `k`.
    pub fn z_pu(&self, k: usize) -> [[Complex64; 3]; 3] {
        let line = &self.lines[self.topology.line[k]];
        let zb = self.base.z_ohm();
        let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (phi, row) in out.iter_mut().enumerate() {
            for (psi, v) in row.iter_mut().enumerate() {
                *v = line.z_ohm(phi, psi) / zb;
            }
        }
        out
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::Validation(format!(
                "format tag '{}' (expected '{FORMAT_TAG}')",
                self.format
            )));
        }
        if !(self.base.s_kva > 0.0 && self.base.v_volt > 0.0) {
            return Err(Error::Validation("base quantities must be positive".into()));
        }
        if self.v_ref.iter().any(|v| !(v.mag > 0.0 && v.mag.is_finite() && v.angle_deg.is_finite())) {
            return Err(Error::Validation("reference voltage magnitudes must be positive".into()));
        }
        let mut ids = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if ids.insert(b.id.as_str(), i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id '{}'", b.id)));
            }
            if !(b.vmin > 0.0 && b.vmin < b.vmax && b.vmax.is_finite()) {
                return Err(Error::Validation(format!(
                    "bus '{}' needs 0 < vmin < vmax (got {} / {})",
                    b.id, b.vmin, b.vmax
                )));
            }
        }
        let refs: Vec<usize> = (0..self.buses.len()).filter(|&i| self.buses[i].reference).collect();
        if refs.len() != 1 {
            return Err(Error::Validation(format!(
                "exactly one reference bus required (found {})",
                refs.len()
            )));
        }
        let reference = refs[0];
        if self.lines.is_empty() {
            return Err(Error::Validation("no reference-connected tree (network has no lines)".into()));
        }
        let mut line_ids = HashMap::new();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.buses.len()];
        for (li, l) in self.lines.iter().enumerate() {
            if line_ids.insert(l.id.as_str(), li).is_some() {
                return Err(Error::Validation(format!("duplicate line id '{}'", l.id)));
            }
            let from = *ids
                .get(l.from.as_str())
                .ok_or_else(|| Error::Validation(format!("line '{}' starts at unknown bus '{}'", l.id, l.from)))?;
            let to = *ids
                .get(l.to.as_str())
                .ok_or_else(|| Error::Validation(format!("line '{}' ends at unknown bus '{}'", l.id, l.to)))?;
            if from == to {
                return Err(Error::Validation(format!("line '{}' is a self-loop", l.id)));
            }
            for phi in 0..3 {
                for psi in 0..3 {
                    let (a, b) = (l.z[phi][psi], l.z[psi][phi]);
                    let scale = 1.0 + a[0].abs().max(a[1].abs());
                    if !(a[0].is_finite() && a[1].is_finite()) {
                        return Err(Error::Validation(format!("line '{}' has a non-finite impedance", l.id)));
                    }
                    if (a[0] - b[0]).abs() > 1e-9 * scale || (a[1] - b[1]).abs() > 1e-9 * scale {
                        return Err(Error::Validation(format!("line '{}' impedance is not symmetric", l.id)));
                    }
                }
                if l.z[phi][phi][0] <= 0.0 {
                    return Err(Error::Validation(format!(
                        "line '{}' self impedance of phase {} needs positive resistance",
                        l.id,
                        Phase::from_index(phi)
                    )));
                }
            }
            adj[from].push((to, li));
            adj[to].push((from, li));
        }
        if self.lines.len() + 1 != self.buses.len() {
            return Err(Error::Validation(format!(
                "radial network needs |lines| = |buses| - 1 ({} lines, {} buses)",
                self.lines.len(),
                self.buses.len()
            )));
        }
        for list in &mut adj {
            list.sort_by(|x, y| self.buses[x.0].id.cmp(&self.buses[y.0].id));
        }

        let mut topo = Topology {
            reference,
            position: vec![None; self.buses.len()],
            ..Topology::default()
        };
        let mut seen = vec![false; self.buses.len()];
        seen[reference] = true;
        let mut queue = VecDeque::from([(reference, None::<usize>)]);
        while let Some((bus, pos)) = queue.pop_front() {
            let via = pos.map(|p| topo.line[p]);
            for &(nb, li) in &adj[bus] {
                if Some(li) == via {
                    continue;
                }
                if seen[nb] {
                    return Err(Error::Validation(format!("line '{}' closes a cycle", self.lines[li].id)));
                }
                seen[nb] = true;
                let k = topo.order.len();
                topo.order.push(nb);
                topo.position[nb] = Some(k);
                topo.parent.push(pos);
                topo.children.push(Vec::new());
                topo.line.push(li);
                if let Some(p) = pos {
                    topo.children[p].push(k);
                }
                queue.push_back((nb, Some(k)));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "bus '{}' is not connected to the reference bus",
                self.buses[i].id
            )));
        }

        let mut cust_ids = HashMap::new();
        for c in &self.customers {
            if cust_ids.insert(c.id.as_str(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate customer id '{}'", c.id)));
            }
            let b = *ids
                .get(c.bus.as_str())
                .ok_or_else(|| Error::Validation(format!("customer '{}' at unknown bus '{}'", c.id, c.bus)))?;
            if b == reference {
                return Err(Error::Validation(format!(
                    "customer '{}' sits on the reference bus, whose voltage is fixed",
                    c.id
                )));
            }
            if !self.buses[b].phases.contains(c.phase) {
                return Err(Error::Validation(format!(
                    "customer '{}' uses phase {} which bus '{}' does not have",
                    c.id, c.phase, c.bus
                )));
            }
            for (label, bnd) in [("p", c.p_bounds), ("q", c.q_bounds)] {
                if !(bnd[0] < bnd[1] && bnd[0].is_finite() && bnd[1].is_finite()) {
                    return Err(Error::Validation(format!(
                        "customer '{}' has degenerate {label} bounds [{}, {}]",
                        c.id, bnd[0], bnd[1]
                    )));
                }
            }
            if !(c.p_forecast.is_finite() && c.q_forecast.is_finite()) {
                return Err(Error::Validation(format!("customer '{}' forecast is not finite", c.id)));
            }
        }
        self.topology = topo;
        Ok(())
    }

    /// Node-line incidence: +1 where a line leaves the bus toward the
    /// reference, -1 where it enters from further downstream.
    pub fn incidence(&self) -> Incidence {
        let t = &self.topology;
        let n = t.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = 1.0;
            for &c in &t.children[k] {
                m[(k, c)] = -1.0;
            }
        }
        Incidence {
            matrix: m,
            bus_ids: t.order.iter().map(|&b| self.buses[b].id.clone()).collect(),
            line_ids: t.line.iter().map(|&l| self.lines[l].id.clone()).collect(),
        }
    }

    /// Net consumption per (position, phase) in kW / kvar for given customer powers.
    pub fn nodal_power(&self, powers: &BTreeMap<String, (f64, f64)>) -> Vec<[Complex64; 3]> {
        let mut out = vec![[Complex64::new(0.0, 0.0); 3]; self.n()];
        for c in &self.customers {
            if let Some(&(p, q)) = powers.get(&c.id) {
                out[self.customer_position(c)][c.phase.index()] += Complex64::new(p, q);
            }
        }
        out
    }
}

/// Settings for [`generate_radial`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    pub base: Base,
    /// Self resistance/reactance range per line, ohms.
    pub self_ohm: (f64, f64),
    /// Mutual coupling as a fraction of the self terms.
    pub mutual_fraction: (f64, f64),
    pub passive_kw: (f64, f64),
    pub vmin: f64,
    pub vmax: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            base: Base {
                s_kva: 10.0,
                v_volt: 230.0,
            },
            self_ohm: (0.02, 0.08),
            mutual_fraction: (0.2, 0.4),
            passive_kw: (0.3, 1.5),
            vmin: 0.94,
            vmax: 1.06,
        }
    }
}

/// Random radial feeder: bus `0` is the reference, every later bus hangs off
/// a uniformly chosen earlier one. Each non-reference bus gets one or two
/// customers; the first customer in the feeder is active, the second passive.
pub fn generate_radial(n_buses: usize, seed: u64, opts: &GeneratorOptions) -> Result<NetworkModel> {
    if n_buses < 2 {
        return Err(Error::Argument("a generated feeder needs at least 2 buses".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bus_id = |i: usize| format!("b{i:03}");
    let mut buses = Vec::with_capacity(n_buses);
    for i in 0..n_buses {
        buses.push(Bus {
            id: bus_id(i),
            vmin: opts.vmin,
            vmax: opts.vmax,
            reference: i == 0,
            phases: PhaseSet::ABC,
        });
    }
    let mut lines = Vec::with_capacity(n_buses - 1);
    let mut customers = Vec::new();
    for i in 1..n_buses {
        let parent = rng.random_range(0..i);
        let mut z = [[[0.0; 2]; 3]; 3];
        for phi in 0..3 {
            z[phi][phi] = [
                rng.random_range(opts.self_ohm.0..opts.self_ohm.1),
                rng.random_range(opts.self_ohm.0..opts.self_ohm.1),
            ];
        }
        for phi in 0..3 {
            for psi in phi + 1..3 {
                let f = rng.random_range(opts.mutual_fraction.0..opts.mutual_fraction.1);
                let v = [f * z[phi][phi][0].min(z[psi][psi][0]), f * z[phi][phi][1].min(z[psi][psi][1])];
                z[phi][psi] = v;
                z[psi][phi] = v;
            }
        }
        lines.push(Line {
            id: format!("l{i:03}"),
            from: bus_id(parent),
            to: bus_id(i),
            z,
        });
        let count = rng.random_range(1..=2);
        for _ in 0..count {
            let k = customers.len();
            let kind = match k {
                0 => CustomerKind::Active,
                1 => CustomerKind::Passive,
                _ if rng.random_bool(0.5) => CustomerKind::Active,
                _ => CustomerKind::Passive,
            };
            let p_forecast = match kind {
                CustomerKind::Passive => rng.random_range(opts.passive_kw.0..opts.passive_kw.1),
                CustomerKind::Active => 0.0,
            };
            customers.push(Customer {
                id: format!("c{k:03}"),
                bus: bus_id(i),
                phase: Phase::from_index(rng.random_range(0..3)),
                kind,
                p_bounds: default_p_bounds(),
                q_bounds: default_q_bounds(),
                p_forecast,
                q_forecast: 0.2 * p_forecast,
            });
        }
    }
    NetworkModel::new(
        format!("radial-{n_buses}-{seed}"),
        opts.base,
        [
            PhasorSpec { mag: 1.0, angle_deg: 0.0 },
            PhasorSpec { mag: 1.0, angle_deg: -120.0 },
            PhasorSpec { mag: 1.0, angle_deg: 120.0 },
        ],
        buses,
        lines,
        customers,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_twobus_loads() {
        let net = NetworkModel::bundled("twobus").unwrap();
        assert_eq!(net.lines.len(), 1);
        assert_eq!(net.n(), 1);
        let kinds: Vec<_> = net.customers.iter().map(|c| (c.id.as_str(), c.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("1", CustomerKind::Active),
                ("2", CustomerKind::Passive),
                ("3", CustomerKind::Active)
            ]
        );
        assert_eq!(net.incidence().matrix, nalgebra::DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn chain_incidence_pattern() {
        let mut net = generate_radial(3, 1, &GeneratorOptions::default()).unwrap();
        net.lines[0].from = "b000".into();
        net.lines[0].to = "b001".into();
        net.lines[1].from = "b001".into();
        net.lines[1].to = "b002".into();
        net.validate().unwrap();
        let m = net.incidence().matrix;
        assert_eq!(m, nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]));
    }

    #[test]
    fn single_bus_is_rejected() {
        let mut net = NetworkModel::bundled("twobus").unwrap();
        net.lines.clear();
        net.buses.truncate(1);
        net.customers = vec![Customer {
            id: "x".into(),
            bus: net.buses[0].id.clone(),
            phase: Phase::A,
            kind: CustomerKind::Passive,
            p_bounds: default_p_bounds(),
            q_bounds: default_q_bounds(),
            p_forecast: 1.0,
            q_forecast: 0.0,
        }];
        let err = net.validate().unwrap_err().to_string();
        assert!(err.contains("no reference-connected tree"), "{err}");
    }

    #[test]
    fn cycles_and_duplicate_references_are_rejected() {
        let mut net = generate_radial(4, 3, &GeneratorOptions::default()).unwrap();
        let mut extra = net.lines[0].clone();
        extra.id = "loop".into();
        extra.from = net.lines[2].to.clone();
        extra.to = net.lines[0].from.clone();
        net.lines.push(extra);
        net.buses.push(Bus {
            id: "island".into(),
            vmin: 0.9,
            vmax: 1.1,
            reference: false,
            phases: PhaseSet::ABC,
        });
        let err = net.validate().unwrap_err().to_string();
        assert!(err.contains("cycle") || err.contains("not connected"), "{err}");

        let mut net = generate_radial(4, 3, &GeneratorOptions::default()).unwrap();
        net.buses[1].reference = true;
        assert!(net.validate().is_err());
    }

    #[test]
    fn file_order_does_not_change_topology() {
        let net = generate_radial(12, 9, &GeneratorOptions::default()).unwrap();
        let mut shuffled = net.clone();
        shuffled.lines.reverse();
        shuffled.buses.reverse();
        shuffled.validate().unwrap();
        let ids = |n: &NetworkModel| n.incidence().bus_ids;
        assert_eq!(ids(&net), ids(&shuffled));
        assert_eq!(net.incidence().matrix, shuffled.incidence().matrix);
    }

    #[test]
    fn phase_set_parsing() {
        assert_eq!("ca".parse::<PhaseSet>().unwrap().to_string(), "ac");
        assert!("aa".parse::<PhaseSet>().is_err());
        assert!("".parse::<PhaseSet>().is_err());
    }
}
