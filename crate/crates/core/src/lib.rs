//! Dynamic operating envelopes for unbalanced radial distribution networks,
//! deterministic and robust against impedance and demand uncertainty.

pub mod acpf;
pub mod error;
pub mod lintopf;
pub mod netmodel;
pub mod robustrc;
pub mod tsro;
pub mod uncertainty;

pub use error::{Error, Result};
