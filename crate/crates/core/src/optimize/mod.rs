//! Protocol optimization: Nelder-Mead over the switching times of a fixed
//! bang/singular structure, a search over a catalog of structures, and
//! projected gradient descent on a sampled control.
//!
//! Switching-time search parameterizes the `k − 1` cumulative switch times
//! of a `k`-segment structure. Points outside the ordered box
//! `0 ≤ s_1 ≤ … ≤ s_{k−1} ≤ t_f` are mapped onto it (clamp, then running
//! maximum) and charged a linear penalty on the distance. Searches run on a
//! coarse grid; the winner is re-evaluated and verified on the fine grid
//! `t_f / 4096`.

mod gradient;
mod nelder_mead;
mod structure;
mod switching;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{preparation_initial, preparation_target, BlochVector, SystemSpec};
use crate::pmp::{OptimalityReport, DEFAULT_TOL_HC, DEFAULT_TOL_PHI};
use crate::propagate::{ControlSchedule, CostKind};

pub use gradient::{gradient_descent_control, GradientMethod, GradientOptions};
pub use nelder_mead::{initial_simplex, minimize, NelderMeadOptions, NelderMeadResult};
pub use structure::{ProtocolStructure, DEFAULT_CATALOG};
pub use switching::{
    optimize_switching_times, search_structures, search_structures_all, select_winner,
    structure_cost,
};

/// Initial state, target, system and cost of an optimization problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub initial: BlochVector,
    pub target: BlochVector,
    pub spec: SystemSpec,
    #[serde(default)]
    pub cost_kind: CostKind,
}

impl Scenario {
    pub fn new(initial: BlochVector, target: BlochVector, spec: SystemSpec, cost_kind: CostKind) -> Result<Self> {
        for (name, v) in [("initial", &initial), ("target", &target)] {
            if !v.is_physical() {
                return Err(Error::InvalidState(format!(
                    "{name} state {:?} lies outside the Bloch ball",
                    v.to_array()
                )));
            }
        }
        Ok(Self {
            initial,
            target,
            spec,
            cost_kind,
        })
    }

    /// Ground state of `σx − 2σz` to ground state of `σx + 2σz`.
    pub fn prepare(spec: SystemSpec) -> Self {
        Self {
            initial: preparation_initial(),
            target: preparation_target(),
            spec,
            cost_kind: CostKind::Overlap,
        }
    }

    /// Keep the initial state of [`Scenario::prepare`] in place.
    pub fn retain(spec: SystemSpec) -> Self {
        Self {
            initial: preparation_initial(),
            target: preparation_initial(),
            spec,
            cost_kind: CostKind::Overlap,
        }
    }

    pub fn with_cost(mut self, kind: CostKind) -> Self {
        self.cost_kind = kind;
        self
    }
}

/// Knobs of the switching-time search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Integrator steps over `[0, t_f]` during the search.
    pub search_steps: usize,
    /// Integrator steps over `[0, t_f]` for the final evaluation and report.
    pub verify_steps: usize,
    pub max_evals: usize,
    /// Weight of the ordering penalty.
    pub penalty: f64,
    /// Costs closer than this are ties, resolved toward fewer segments.
    pub tie_tol: f64,
    pub tol_hc: f64,
    pub tol_phi: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            search_steps: 512,
            verify_steps: 4096,
            max_evals: 1500,
            penalty: 10.0,
            tie_tol: 1e-6,
            tol_hc: DEFAULT_TOL_HC,
            tol_phi: DEFAULT_TOL_PHI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// `None` for sampled controls.
    pub structure: Option<ProtocolStructure>,
    /// Segment durations, summing to `t_f`.
    pub switch_times: Vec<f64>,
    pub t_f: f64,
    pub cost: f64,
    /// `⟨target, ρ(t_f)⟩`
    pub overlap: f64,
    pub evaluations: usize,
    pub report: OptimalityReport,
    /// Sample values for gradient results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<Vec<f64>>,
}

impl OptimizeResult {
    pub fn schedule(&self, u_bound: f64) -> Result<ControlSchedule> {
        match (&self.structure, &self.controls) {
            (Some(s), _) => ControlSchedule::from_parts(s.kinds(), &self.switch_times),
            (None, Some(u)) => ControlSchedule::sampled(self.t_f, u.clone(), u_bound),
            (None, None) => Err(Error::InvalidSchedule("result carries no protocol".into())),
        }
    }

    pub fn label(&self) -> String {
        self.structure
            .as_ref()
            .map_or_else(|| "sampled".to_string(), |s| s.label())
    }

    /// Cumulative switching instants.
    pub fn switch_instants(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.switch_times[..self.switch_times.len().saturating_sub(1)]
            .iter()
            .map(|d| {
                t += d;
                t
            })
            .collect()
    }
}
