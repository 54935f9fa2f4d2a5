use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Duration;

/// Environment variable overriding the duality-gap tolerance.
pub const TOL_ENV_VAR: &str = "ENVELOPE_SOLVER_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative primal/dual feasibility tolerance.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Slack elimination and dependent-row removal.
    pub presolve: bool,
    /// Ruiz equilibration of the constraint data.
    pub equilibrate: bool,
    /// Keep a per-iteration trace in the report.
    pub keep_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            presolve: true,
            equilibrate: true,
            keep_trace: false,
        }
    }
}

impl SolveOptions {
    /// Defaults with the gap tolerance taken from [`TOL_ENV_VAR`] when set.
    pub fn from_env() -> Self {
        let mut opts = Self::default();
        if let Some(tol) = std::env::var(TOL_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
        {
            opts.gap_tol = tol;
        }
        opts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iter: usize,
    pub primal_cost: f64,
    pub dual_cost: f64,
    pub rel_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub tau: f64,
    pub kappa: f64,
    pub step: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub status: SolveStatus,
    /// Primal point in the program's variable space (best iterate on failure).
    pub x: Vec<f64>,
    /// Equality multipliers for the minimization of `-objective`.
    pub y: Vec<f64>,
    /// Conic multipliers per variable (zero for free variables).
    pub z: Vec<f64>,
    /// Objective value in the program's maximization sense.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Absolute gap `s'z` at the returned point.
    pub gap: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub message: String,
    pub trace: Vec<IterationLog>,
}

impl SolverReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn failed(status: SolveStatus, n: usize, message: impl Into<String>) -> Self {
        SolverReport {
            status,
            x: vec![0.0; n],
            y: Vec::new(),
            z: vec![0.0; n],
            objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            gap: f64::INFINITY,
            rel_gap: f64::INFINITY,
            iterations: 0,
            wall_time: Duration::ZERO,
            message: message.into(),
            trace: Vec::new(),
        }
    }
}
