#![allow(dead_code)]

use nalgebra::DVector;
use rdoe_core::lintopf::{assemble, FeasibleRegion, OperatingPoint};
use rdoe_core::netmodel::{generate_radial, GeneratorOptions, NetworkModel};
use rdoe_core::uncertainty::{Component, UncertaintyModel, UncertaintySpec};

pub fn twobus() -> NetworkModel {
    NetworkModel::bundled("twobus").unwrap()
}

pub fn feeder(buses: usize, seed: u64) -> NetworkModel {
    generate_radial(buses, seed, &GeneratorOptions::default()).unwrap()
}

pub fn region(net: &NetworkModel) -> FeasibleRegion {
    let ls = assemble(net, &OperatingPoint::flat(net)).unwrap();
    FeasibleRegion::with_forecast(ls, net).unwrap()
}

/// Bundled spec with the impedance and demand radii replaced.
pub fn twobus_model(net: &NetworkModel, gamma: f64, rho: f64) -> UncertaintyModel {
    let mut spec = UncertaintySpec::bundled("twobus").unwrap();
    spec.component_mut(Component::Impedance).unwrap().ball.radius = gamma;
    spec.component_mut(Component::P2).unwrap().ball.radius = rho;
    spec.resolve(net).unwrap()
}

/// Mutual terms of the first two lines in a box, passive demand in an L1
/// ball. Uncertainty on every line of a larger feeder makes the robust
/// programs too big for quick tests.
pub fn feeder_model(net: &NetworkModel, gamma: f64, rho: f64) -> UncertaintyModel {
    let lines: Vec<String> = net.lines.iter().take(2).map(|l| format!("\"{}\"", l.id)).collect();
    let lines = lines.join(", ");
    let text = format!(
        r#"{{
  "impedance": {{ "parameters": {{ "lines": [{lines}], "entries": "mutual" }}, "center": "nominal", "map": "diag-of-center", "radius": {gamma}, "norm": "inf" }},
  "p2": {{ "center": "nominal", "map": "diag-of-center", "radius": {rho}, "norm": "1" }}
}}"#
    );
    UncertaintySpec::from_json(&text).unwrap().resolve(net).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
