use serde::{Deserialize, Serialize};

use crate::dmp::Injection;
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Where exploration noise (or a learned residual) enters the primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationLocus {
    /// Perturbs the forcing weights; held for a whole episode.
    ParameterSpace,
    /// Phase-modulated term inside the transformation system.
    CouplingTerm,
    /// Added to the velocity outside the canonical system.
    TaskSpace,
    None,
}

impl ExplorationLocus {
    pub const ALL: [ExplorationLocus; 4] = [
        ExplorationLocus::ParameterSpace,
        ExplorationLocus::CouplingTerm,
        ExplorationLocus::TaskSpace,
        ExplorationLocus::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExplorationLocus::ParameterSpace => "parameter-space",
            ExplorationLocus::CouplingTerm => "coupling-term",
            ExplorationLocus::TaskSpace => "task-space",
            ExplorationLocus::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

impl std::fmt::Display for ExplorationLocus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Routes `eta` into exactly one injection slot.
///
/// For `ParameterSpace`, `eta` is either one value per DOF (broadcast over
/// every basis function) or a full `n_basis * dofs` row-major matrix.
/// `CouplingTerm` is scaled by the phase so it fades with the forcing term.
pub fn inject_exploration<T: Real>(
    locus: ExplorationLocus,
    eta: &[T],
    dofs: usize,
    n_basis: usize,
    phase: T,
) -> Result<Injection<T>> {
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(invalid("exploration noise must be finite"));
    }
    let mut inj = Injection::none();
    match locus {
        ExplorationLocus::None => {
            if eta.iter().any(|v| *v != T::zero()) {
                return Err(invalid("locus None received nonzero noise"));
            }
        }
        ExplorationLocus::TaskSpace => {
            check_len(eta, dofs)?;
            inj.task = Some(eta.to_vec());
        }
        ExplorationLocus::CouplingTerm => {
            check_len(eta, dofs)?;
            inj.coupling = Some(eta.iter().map(|&e| phase * e).collect());
        }
        ExplorationLocus::ParameterSpace => {
            let rows = if eta.len() == dofs {
                vec![eta.to_vec(); n_basis]
            } else if eta.len() == dofs * n_basis {
                eta.chunks(dofs).map(|c| c.to_vec()).collect()
            } else {
                return Err(invalid(format!(
                    "parameter-space noise needs {dofs} or {} entries, got {}",
                    dofs * n_basis,
                    eta.len()
                )));
            };
            inj.weight_noise = Some(rows);
        }
    }
    Ok(inj)
}

fn check_len<T>(eta: &[T], dofs: usize) -> Result<()> {
    if eta.len() != dofs {
        return Err(invalid(format!("expected {dofs} noise entries, got {}", eta.len())));
    }
    Ok(())
}
