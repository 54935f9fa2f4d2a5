//! LP/SOCP modelling layer and a dense homogeneous interior-point solver.
//!
//! Programs are assembled with [`ConicProgram`]'s builder methods and solved
//! through [`solve`] or a named backend from the registry.

mod backend;
mod cones;
mod dump;
mod ipm;
mod kkt;
mod norm;
mod presolve;
mod program;
mod report;

pub use backend::{
    backend, backend_names, register_backend, solve, BackendError, ConicSolver, InteriorPoint,
    DEFAULT_BACKEND,
};
pub use dump::{dump, parse};
pub use ipm::solve_ipm;
pub use norm::NormKind;
pub use program::{Cone, ConicProgram, LinExpr, ProgramError};
pub use report::{IterationLog, SolveOptions, SolveStatus, SolverReport, TOL_ENV_VAR};
