use rdoe_conic::SolveStatus;
use rdoe_core::Error;
use std::fmt;
use std::process::ExitCode;

/// Failure with a stable process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input files (exit 1).
    Config(String),
    /// The envelope problem has no solution (exit 2).
    Infeasible(String),
    /// The solver or power flow failed numerically (exit 3).
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Solver(_) => 3,
        })
    }

    pub fn from_status(status: SolveStatus, message: &str) -> Option<Self> {
        match status {
            SolveStatus::Optimal => None,
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                Some(CliError::Infeasible(format!("problem is {status}: {message}")))
            }
            SolveStatus::NumericalFailure => Some(CliError::Solver(format!("solver failed: {message}"))),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Infeasible(m) | CliError::Solver(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Program(_) | Error::Sampling(_) => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
