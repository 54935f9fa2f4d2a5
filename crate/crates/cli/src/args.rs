use clap::{Args, Parser, Subcommand};
use rdoe_conic::NormKind;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "rdoe", version, about = "Deterministic and robust dynamic operating envelopes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic envelopes.
    Ddoe(EnvelopeArgs),
    /// Robust envelopes under impedance and/or demand uncertainty.
    Rdoe(RobustArgs),
    /// Boundary of the feasible region over two active customers.
    FrTrace(TraceArgs),
    /// Exact power-flow check of an envelope.
    PfAudit(AuditArgs),
    /// Linear-model voltage error at export/import test points.
    LinError(LinErrorArgs),
    /// Robust envelopes by scenario generation over box vertices.
    Tsro(TsroArgs),
    /// Repeated solves with median timings.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EnvelopeArgs {
    /// Network file, or @NAME for a bundled network.
    #[arg(long, default_value = "@twobus")]
    pub network: String,
    /// equal, independent or weighted:W1,W2,...
    #[arg(long, default_value = "equal")]
    pub allocation: String,
    /// fixed, active or all.
    #[arg(long, default_value = "fixed")]
    pub q_control: String,
    /// export or import.
    #[arg(long, default_value = "export")]
    pub direction: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Solver duality-gap tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct UncertaintyArgs {
    /// Uncertainty file, or @NAME for a bundled one.
    #[arg(long, default_value = "@twobus")]
    pub uncertainty: String,
    /// Norm of the impedance set.
    #[arg(long)]
    pub norm: Option<NormKind>,
    /// Radius of the impedance set.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Norm of the passive-demand set.
    #[arg(long)]
    pub demand_norm: Option<NormKind>,
    /// Radius of the passive-demand set.
    #[arg(long)]
    pub demand_radius: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RobustArgs {
    #[command(flatten)]
    pub env: EnvelopeArgs,
    #[command(flatten)]
    pub unc: UncertaintyArgs,
    /// det, impedance, demand or bilinear.
    #[arg(long, default_value = "impedance")]
    pub mode: String,
    /// Monte-Carlo draws for the linear-model robustness check (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub robust: RobustArgs,
    /// Number of sweep directions.
    #[arg(long, default_value_t = 72)]
    pub directions: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub robust: RobustArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LinErrorArgs {
    #[arg(long, default_value = "@twobus")]
    pub network: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also report the error after one operating-point update per scenario.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TsroArgs {
    #[command(flatten)]
    pub env: EnvelopeArgs,
    #[command(flatten)]
    pub unc: UncertaintyArgs,
    /// Violation below which a round is accepted.
    #[arg(long, default_value_t = 1e-7)]
    pub violation_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_rounds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub env: EnvelopeArgs,
    #[command(flatten)]
    pub unc: UncertaintyArgs,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
}
