use super::envelope::{solve_ddoe, EnvelopeOptions, EnvelopeResult};
use super::region::FeasibleRegion;
use super::system::{assemble, OperatingPoint};
use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;

#[derive(Debug, Clone)]
pub struct RefinementTrace {
    pub result: EnvelopeResult,
    pub op: OperatingPoint,
    /// Largest voltage change of the operating point after each solve.
    pub moves: Vec<f64>,
    pub converged: bool,
}

/// Alternates deterministic solves and operating-point updates until the
/// point moves less than `tol` (p.u.).
pub fn refine_ddoe(net: &NetworkModel, opts: &EnvelopeOptions, tol: f64, max_iter: usize) -> Result<RefinementTrace> {
    let mut op = OperatingPoint::flat(net);
    let mut moves = Vec::new();
    for _ in 0..max_iter {
        let ls = assemble(net, &op)?;
        let fr = FeasibleRegion::with_forecast(ls, net)?;
        let result = solve_ddoe(&fr, opts)?;
        if !result.is_optimal() {
            return Err(Error::Argument(format!("envelope solve ended {}", result.status)));
        }
        let mut q2 = fr.q2.clone();
        for (j, c) in result.passive_q.iter().enumerate() {
            q2[j] = c.q_kvar;
        }
        let w = fr.system.injection_vector(&result.p1(), &fr.p2, &result.q1(), &q2);
        let next = fr.system.refine_operating_point(&w);
        next.check(net)?;
        let moved = next.max_difference(&op);
        moves.push(moved);
        op = next;
        if moved < tol {
            return Ok(RefinementTrace {
                result,
                op,
                moves,
                converged: true,
            });
        }
    }
    let ls = assemble(net, &op)?;
    let result = solve_ddoe(&FeasibleRegion::with_forecast(ls, net)?, opts)?;
    Ok(RefinementTrace {
        result,
        op,
        moves,
        converged: false,
    })
}
