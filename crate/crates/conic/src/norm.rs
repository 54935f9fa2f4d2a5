use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The vector norms that keep robust counterparts LP- or SOCP-representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];

    /// Dual norm: `||y||_* = sup { y'x : ||x|| <= 1 }`.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::L2 => NormKind::L2,
            NormKind::LInf => NormKind::L1,
        }
    }

    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::L1 => write!(f, "1"),
            NormKind::L2 => write!(f, "2"),
            NormKind::LInf => write!(f, "inf"),
        }
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" | "one" => Ok(NormKind::L1),
            "2" | "l2" | "two" => Ok(NormKind::L2),
            "inf" | "linf" | "infinity" | "max" => Ok(NormKind::LInf),
            other => Err(format!("unknown norm '{other}' (expected 1, 2 or inf)")),
        }
    }
}
