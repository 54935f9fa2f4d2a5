//! Norm-ball uncertainty sets over line impedances and passive demand.

mod ball;
mod impedance;
mod spec;

pub use ball::{
    add_support_bound, chi_square_radius, AffineNormBall, BallSet, MAX_REJECTIONS, MAX_VERTEX_DIM,
    MEMBERSHIP_TOL,
};
pub use impedance::{Coupling, EntrySelection, ImpedanceParams, ParamDescriptor, Part};
pub use spec::{
    BallSpec, CenterSpec, Component, ComponentSpec, ImpedanceSpec, ImpedanceUncertainty, MapSpec, ParamSpec,
    UncertaintyModel, UncertaintySpec,
};
pub use rdoe_conic::NormKind;
