//! `rdoe` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration error, 2 infeasible problem,
//! 3 solver or power-flow failure.

mod args;
mod commands;
mod error;

use args::{Cli, Command};
use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Ddoe(a) => commands::cmd_ddoe(a),
        Command::Rdoe(a) => commands::cmd_rdoe(a),
        Command::FrTrace(a) => commands::cmd_fr_trace(a),
        Command::PfAudit(a) => commands::cmd_pf_audit(a),
        Command::LinError(a) => commands::cmd_lin_error(a),
        Command::Tsro(a) => commands::cmd_tsro(a),
        Command::Bench(a) => commands::cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
