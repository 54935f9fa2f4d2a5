//! Named solver backends. The bundled interior-point method is registered as
//! `"ipm"`; callers may add others (e.g. bindings to a commercial solver).

use crate::ipm::solve_ipm;
use crate::program::{ConicProgram, ProgramError};
use crate::report::{SolveOptions, SolverReport};
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};
use thiserror::Error;

pub const DEFAULT_BACKEND: &str = "ipm";

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<SolverReport, ProgramError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct InteriorPoint;

impl ConicSolver for InteriorPoint {
    fn name(&self) -> &str {
        DEFAULT_BACKEND
    }

    fn solve(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<SolverReport, ProgramError> {
        solve_ipm(prog, opts)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BackendError {
    #[error("solver backend '{0}' is already registered")]
    Duplicate(String),
    #[error("unknown solver backend '{0}' (registered: {1})")]
    Unknown(String, String),
}

type Registry = RwLock<BTreeMap<String, Arc<dyn ConicSolver>>>;

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| {
        let mut map: BTreeMap<String, Arc<dyn ConicSolver>> = BTreeMap::new();
        map.insert(DEFAULT_BACKEND.to_string(), Arc::new(InteriorPoint));
        RwLock::new(map)
    })
}

pub fn register_backend(solver: Arc<dyn ConicSolver>) -> Result<(), BackendError> {
    let mut map = registry().write().expect("backend registry poisoned");
    let name = solver.name().to_string();
    if map.contains_key(&name) {
        return Err(BackendError::Duplicate(name));
    }
    map.insert(name, solver);
    Ok(())
}

pub fn backend(name: &str) -> Result<Arc<dyn ConicSolver>, BackendError> {
    let map = registry().read().expect("backend registry poisoned");
    map.get(name).cloned().ok_or_else(|| {
        BackendError::Unknown(name.to_string(), map.keys().cloned().collect::<Vec<_>>().join(", "))
    })
}

pub fn backend_names() -> Vec<String> {
    registry().read().expect("backend registry poisoned").keys().cloned().collect()
}

/// Solves with the default backend.
pub fn solve(prog: &ConicProgram, opts: &SolveOptions) -> Result<SolverReport, ProgramError> {
    solve_ipm(prog, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Named(&'static str);

    impl ConicSolver for Named {
        fn name(&self) -> &str {
            self.0
        }
        fn solve(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<SolverReport, ProgramError> {
            solve_ipm(prog, opts)
        }
    }

    #[test]
    fn default_is_registered_and_duplicates_rejected() {
        assert!(backend(DEFAULT_BACKEND).is_ok());
        assert_eq!(
            register_backend(Arc::new(InteriorPoint)),
            Err(BackendError::Duplicate("ipm".into()))
        );
        register_backend(Arc::new(Named("mirror"))).unwrap();
        assert!(backend_names().contains(&"mirror".to_string()));
        assert!(matches!(backend("missing"), Err(BackendError::Unknown(..))));
    }
}
