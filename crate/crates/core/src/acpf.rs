//! Exact unbalanced power flow on radial feeders by backward/forward sweep.

use crate::error::{Error, Result};
use crate::lintopf::{assemble, EnvelopeResult, FeasibleRegion, OperatingPoint};
use crate::netmodel::NetworkModel;
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Per topology position and phase, per unit.
    pub v: Vec<[Complex64; 3]>,
    /// Current of the parent line of each position, per unit.
    pub i: Vec<[Complex64; 3]>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest complex-power mismatch per node and phase, per unit.
    pub residual: f64,
}

impl PowerFlowSolution {
    pub fn magnitudes(&self) -> Vec<[f64; 3]> {
        self.v.iter().map(|r| [r[0].norm(), r[1].norm(), r[2].norm()]).collect()
    }
}

/// Customer consumption map (kW, kvar) with active customers at `p1`/`q1`
/// and passive ones at `p2`/`q2`, all in network order.
pub fn customer_powers(
    net: &NetworkModel,
    p1: &DVector<f64>,
    q1: &DVector<f64>,
    p2: &DVector<f64>,
    q2: &DVector<f64>,
) -> BTreeMap<String, (f64, f64)> {
    let mut map = BTreeMap::new();
    for (j, c) in net.active_customers().enumerate() {
        map.insert(c.id.clone(), (p1[j], q1[j]));
    }
    for (j, c) in net.passive_customers().enumerate() {
        map.insert(c.id.clone(), (p2[j], q2[j]));
    }
    map
}

/// Passive demand at forecast.
pub fn passive_forecast(net: &NetworkModel) -> (DVector<f64>, DVector<f64>) {
    let pas: Vec<_> = net.passive_customers().collect();
    (
        DVector::from_iterator(pas.len(), pas.iter().map(|c| c.p_forecast)),
        DVector::from_iterator(pas.len(), pas.iter().map(|c| c.q_forecast)),
    )
}

fn mismatch(net: &NetworkModel, s_pu: &[[Complex64; 3]], v: &[[Complex64; 3]], i: &[[Complex64; 3]]) -> f64 {
    let t = net.topology();
    let mut worst: f64 = 0.0;
    for k in 0..net.n() {
        for phi in 0..3 {
            let mut out = i[k][phi];
            for &c in &t.children[k] {
                out -= i[c][phi];
            }
            worst = worst.max((v[k][phi] * out.conj() - s_pu[k][phi]).norm());
        }
    }
    worst
}

/// Power flow for given customer consumptions (kW, kvar; positive is load).
pub fn solve_acpf(
    net: &NetworkModel,
    powers: &BTreeMap<String, (f64, f64)>,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    if !(tol > 0.0) {
        return Err(Error::Argument("power-flow tolerance must be positive".into()));
    }
    let n = net.n();
    let t = net.topology();
    let s_base = net.base.s_kva;
    let s_pu: Vec<[Complex64; 3]> = net
        .nodal_power(powers)
        .into_iter()
        .map(|r| [r[0] / s_base, r[1] / s_base, r[2] / s_base])
        .collect();
    let z: Vec<_> = (0..n).map(|k| net.z_pu(k)).collect();
    let v_ref = net.v_ref_complex();
    let mut v = vec![v_ref; n];
    let mut i = vec![[Complex64::new(0.0, 0.0); 3]; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for k in (0..n).rev() {
            for phi in 0..3 {
                let mut cur = (s_pu[k][phi] / v[k][phi]).conj();
                for &c in &t.children[k] {
                    cur += i[c][phi];
                }
                i[k][phi] = cur;
            }
        }
        let mut delta: f64 = 0.0;
        for k in 0..n {
            let up = t.parent[k].map_or(v_ref, |p| v[p]);
            for phi in 0..3 {
                let mut drop = Complex64::new(0.0, 0.0);
                for psi in 0..3 {
                    drop += z[k][phi][psi] * i[k][psi];
                }
                let new = up[phi] - drop;
                delta = delta.max((new - v[k][phi]).norm());
                v[k][phi] = new;
            }
        }
        if !delta.is_finite() {
            break;
        }
        if delta < tol {
            converged = true;
            break;
        }
    }
    // Currents consistent with the final voltages.
    for k in (0..n).rev() {
        for phi in 0..3 {
            let mut cur = (s_pu[k][phi] / v[k][phi]).conj();
            for &c in &t.children[k] {
                cur += i[c][phi];
            }
            i[k][phi] = cur;
        }
    }
    let residual = mismatch(net, &s_pu, &v, &i);
    Ok(PowerFlowSolution {
        v,
        i,
        converged: converged && residual.is_finite(),
        iterations,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Export,
    Import,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub status: FlowStatus,
    /// Label of the load level, e.g. "high".
    pub load: &'static str,
    /// Power of every active customer, kW (magnitude).
    pub active_kw: f64,
}

/// Export/import at 3 kW ("high") and 1 kW ("low") per active customer.
pub fn standard_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for status in [FlowStatus::Export, FlowStatus::Import] {
        for (load, kw) in [("high", 3.0), ("low", 1.0)] {
            out.push(Scenario {
                status,
                load,
                active_kw: kw,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub status: FlowStatus,
    pub load: String,
    pub avg_vm_error: f64,
    pub max_vm_error: f64,
    pub converged: bool,
}

/// Voltage-magnitude error of the linear model against the exact flow for
/// one set of injections.
pub fn vm_error(
    net: &NetworkModel,
    op: &OperatingPoint,
    p1: &DVector<f64>,
    q1: &DVector<f64>,
) -> Result<(f64, f64, bool)> {
    let (p2, q2) = passive_forecast(net);
    let ls = assemble(net, op)?;
    let w = ls.injection_vector(p1, &p2, q1, &q2);
    let (v, _) = ls.state(&w);
    let lin = ls.voltages(&v);
    let pf = solve_acpf(net, &customer_powers(net, p1, q1, &p2, &q2), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (a, b) in lin.iter().zip(&pf.v) {
        for phi in 0..3 {
            let e = (a[phi].norm() - b[phi].norm()).abs();
            sum += e;
            max = max.max(e);
        }
    }
    Ok((sum / (3 * net.n()) as f64, max, pf.converged))
}

fn scenario_injections(net: &NetworkModel, sc: &Scenario) -> (DVector<f64>, DVector<f64>) {
    let act: Vec<_> = net.active_customers().collect();
    let sign = match sc.status {
        FlowStatus::Export => -1.0,
        FlowStatus::Import => 1.0,
    };
    (
        DVector::from_element(act.len(), sign * sc.active_kw),
        DVector::from_iterator(act.len(), act.iter().map(|c| c.q_forecast)),
    )
}

pub fn linearization_error_report(
    net: &NetworkModel,
    op: &OperatingPoint,
    scenarios: &[Scenario],
) -> Result<Vec<ErrorRow>> {
    scenarios
        .par_iter()
        .map(|sc| {
            let (p1, q1) = scenario_injections(net, sc);
            let (avg, max, converged) = vm_error(net, op, &p1, &q1)?;
            Ok(ErrorRow {
                status: sc.status,
                load: sc.load.to_string(),
                avg_vm_error: avg,
                max_vm_error: max,
                converged,
            })
        })
        .collect()
}

/// Operating point moved to the linear-model voltages of a scenario.
pub fn refined_point(net: &NetworkModel, op: &OperatingPoint, sc: &Scenario) -> Result<OperatingPoint> {
    let (p1, q1) = scenario_injections(net, sc);
    let (p2, q2) = passive_forecast(net);
    let ls = assemble(net, op)?;
    let refined = ls.refine_operating_point(&ls.injection_vector(&p1, &p2, &q1, &q2));
    refined.check(net)?;
    Ok(refined)
}

pub fn error_report_csv(rows: &[ErrorRow]) -> String {
    let mut s = String::from("status,load,avg_vm_error,max_vm_error\n");
    for r in rows {
        let status = match r.status {
            FlowStatus::Export => "export",
            FlowStatus::Import => "import",
        };
        s.push_str(&format!("{status},{},{:.6},{:.6}\n", r.load, r.avg_vm_error, r.max_vm_error));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub bus: String,
    pub phase: char,
    pub vm: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub converged: bool,
    pub vm_max: f64,
    pub vm_min: f64,
    /// Largest amount by which any magnitude leaves its limits (0 if none).
    pub worst_excess: f64,
    pub violations: Vec<Violation>,
}

/// Exact voltages with every active customer at its envelope and passive
/// customers at `p2`/`q2` (forecast when `None`).
pub fn feasibility_audit(
    net: &NetworkModel,
    env: &EnvelopeResult,
    passive: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<AuditReport> {
    if !env.is_optimal() {
        return Err(Error::Argument(format!("envelope status is {}", env.status)));
    }
    let (fp2, fq2) = passive_forecast(net);
    let (p2, mut q2) = match passive {
        Some((p, q)) => (p.clone(), q.clone()),
        None => (fp2, fq2),
    };
    for (j, c) in env.passive_q.iter().enumerate() {
        q2[j] = c.q_kvar;
    }
    let powers = customer_powers(net, &env.p1(), &env.q1(), &p2, &q2);
    let pf = solve_acpf(net, &powers, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(audit_voltages(net, &pf))
}

pub fn audit_voltages(net: &NetworkModel, pf: &PowerFlowSolution) -> AuditReport {
    let t = net.topology();
    let mut report = AuditReport {
        converged: pf.converged,
        vm_max: f64::NEG_INFINITY,
        vm_min: f64::INFINITY,
        worst_excess: 0.0,
        violations: Vec::new(),
    };
    for (k, row) in pf.v.iter().enumerate() {
        let bus = &net.buses[t.order[k]];
        for (phi, v) in row.iter().enumerate() {
            let vm = v.norm();
            report.vm_max = report.vm_max.max(vm);
            report.vm_min = report.vm_min.min(vm);
            let excess = (vm - bus.vmax).max(bus.vmin - vm);
            if excess > 0.0 {
                report.worst_excess = report.worst_excess.max(excess);
                report.violations.push(Violation {
                    bus: bus.id.clone(),
                    phase: crate::netmodel::Phase::from_index(phi).label(),
                    vm,
                    excess,
                });
            }
        }
    }
    report
}

/// Linear-model check of a region at given injections, for audits that
/// should not depend on the exact flow.
pub fn linear_excess(fr: &FeasibleRegion, p1: &DVector<f64>, q1: &DVector<f64>) -> f64 {
    fr.max_violation(&fr.w_of(p1, q1)).max(0.0)
}
