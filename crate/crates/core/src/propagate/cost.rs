use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlochVector, CostateVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// `−⟨ρ_f, ρ(t_f)⟩`
    #[default]
    Overlap,
    /// `Σ_ij |ρ_f,ij − ρ(t_f)_ij|² = |ρ_f − ρ(t_f)|² / 2`
    Frobenius,
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "overlap" => Ok(CostKind::Overlap),
            "frobenius" => Ok(CostKind::Frobenius),
            other => Err(Error::Parse(format!("unknown cost kind {other:?}"))),
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Overlap => "overlap",
            CostKind::Frobenius => "frobenius",
        })
    }
}

pub fn terminal_cost(rho_tf: &BlochVector, target: &BlochVector, kind: CostKind) -> f64 {
    match kind {
        CostKind::Overlap => -target.dot(rho_tf),
        CostKind::Frobenius => (target.0 - rho_tf.0).norm_squared() / 2.0,
    }
}

/// `∇C` at `ρ(t_f)`: the costate boundary value.
pub fn terminal_gradient(rho_tf: &BlochVector, target: &BlochVector, kind: CostKind) -> CostateVector {
    match kind {
        CostKind::Overlap => CostateVector(-target.0),
        CostKind::Frobenius => CostateVector(rho_tf.0 - target.0),
    }
}
