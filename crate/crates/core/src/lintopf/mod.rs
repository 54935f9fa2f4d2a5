//! Linearized three-phase network model, its feasible region and
//! deterministic envelopes.

mod envelope;
mod refine;
mod region;
mod system;
mod trace;

pub use envelope::{
    add_region_rows, base_program, finish, solve_ddoe, AllocationPolicy, CustomerEnvelope, DecisionLayout,
    Direction, EnvelopeOptions, EnvelopeResult, QControl, Timing,
};
pub use refine::{refine_ddoe, RefinementTrace};
pub use region::FeasibleRegion;
pub use system::{
    assemble, impedance_matrix, state_index, voltage_linearization, LinearSystem, OperatingPoint,
};
pub use trace::{trace_fr_2d, trace_region, BoundaryPoint, Polygon};
