//! Necessary conditions of the maximum principle: switching function,
//! c-Hamiltonian and a quantified check of a computed protocol.
//!
//! The costate is the gradient of the terminal cost, so along an optimal
//! protocol the control *minimizes* `H_c`: `u = −u_bound` where `Φ > 0` and
//! `u = +u_bound` where `Φ < 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::lie_bracket;
use crate::model::{
    drift_field, drive_field, generator, BlochVector, CostateVector, PureState, SystemSpec,
};
use crate::propagate::{
    evolve_costate, evolve_state, terminal_cost, terminal_gradient, ControlSchedule,
    CostKind, CostateTrajectory, SegmentKind, Trajectory,
};

/// Default tolerance on `H_c` drift.
pub const DEFAULT_TOL_HC: f64 = 1e-3;
/// Default tolerance on switching-function residuals.
pub const DEFAULT_TOL_PHI: f64 = 1e-3;
/// Nodes excluded on each side of a switching time.
pub const SWITCH_EXCLUSION_STEPS: usize = 2;
/// `|hc_mean| < NEAR_ZERO_FACTOR · tol_hc` is reported as near zero.
pub const NEAR_ZERO_FACTOR: f64 = 10.0;

/// `Φ = ⟨λ, g ρ⟩ = 2 λ·(h1 × ρ)`.
pub fn switching_function(lambda: &CostateVector, rho: &BlochVector, spec: &SystemSpec) -> f64 {
    2.0 * lambda.0.dot(&spec.drive_axis().cross(&rho.0))
}

/// `dΦ/dt = ⟨λ, [f, g] ρ⟩`, independent of the control.
pub fn switching_rate(lambda: &CostateVector, rho: &BlochVector, spec: &SystemSpec) -> f64 {
    let b = lie_bracket(&drift_field(spec), &drive_field(spec));
    lambda.0.dot(&b.apply(rho))
}

/// `H_c = ⟨λ, (f + u g) ρ⟩`.
pub fn control_hamiltonian(
    lambda: &CostateVector,
    rho: &BlochVector,
    u: f64,
    spec: &SystemSpec,
) -> f64 {
    lambda.0.dot(&(generator(spec, u) * rho.0))
}

/// `Im⟨a|(αx σx + αz σz)|b⟩`
fn im_matrix_element(a: &PureState, b: &PureState, ax: f64, az: f64) -> f64 {
    let hb0 = b.c1 * ax + b.c0 * az;
    let hb1 = b.c0 * ax - b.c1 * az;
    (a.c0.conj() * hb0 + a.c1.conj() * hb1).im
}

/// Wave-function switching function `Im⟨Π|Hd|Ψ⟩`. For pure states it is a
/// quarter of the Bloch-vector switching function.
pub fn wave_switching_function(pi: &PureState, psi: &PureState, spec: &SystemSpec) -> f64 {
    im_matrix_element(pi, psi, spec.xi, 1.0)
}

/// Wave-function c-Hamiltonian `Im⟨Π|H(u)|Ψ⟩`.
pub fn wave_control_hamiltonian(pi: &PureState, psi: &PureState, u: f64, spec: &SystemSpec) -> f64 {
    im_matrix_element(pi, psi, 1.0 + u * spec.xi, u)
}

/// Overlap `|⟨a|b⟩|²`.
pub fn fidelity(a: &PureState, b: &PureState) -> f64 {
    let z: Complex64 = a.inner(b);
    z.norm_sqr()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HcSign {
    Negative,
    NearZero,
    Positive,
}

impl HcSign {
    pub fn classify(hc_mean: f64, tol_hc: f64) -> Self {
        if hc_mean.abs() < NEAR_ZERO_FACTOR * tol_hc {
            HcSign::NearZero
        } else if hc_mean < 0.0 {
            HcSign::Negative
        } else {
            HcSign::Positive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HcSign::Negative => "negative",
            HcSign::NearZero => "near_zero",
            HcSign::Positive => "positive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub times: Vec<f64>,
    pub hc_samples: Vec<f64>,
    pub phi_samples: Vec<f64>,
    pub hc_mean: f64,
    pub hc_drift: f64,
    /// Checked nodes where `u·Φ > tol_phi`.
    pub bang_violations: usize,
    /// Largest `u·Φ` over checked bang nodes (non-positive when all agree).
    pub worst_bang_margin: f64,
    pub singular_residual: f64,
    pub hc_sign: HcSign,
    pub tol_hc: f64,
    pub tol_phi: f64,
    pub passed: bool,
}

impl OptimalityReport {
    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "{}: hc_drift={:.3e} bang_violations={} worst_bang_margin={:.3e} singular_residual={:.3e} hc_mean={:.6e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.hc_drift,
            self.bang_violations,
            self.worst_bang_margin,
            self.singular_residual,
            self.hc_mean,
            self.hc_sign.as_str(),
        )
    }
}

/// How a node of the grid is checked.
#[derive(Clone, Copy, PartialEq)]
enum NodeRole {
    Skip,
    Bang,
    Singular,
}

/// Assigns a role to every node. Segmented schedules use the declared
/// segment kinds; sampled schedules treat saturated samples as bang and the
/// others as singular. Nodes within [`SWITCH_EXCLUSION_STEPS`] of a boundary
/// between differently classified pieces are skipped.
fn node_roles(traj: &Trajectory, sched: &ControlSchedule, spec: &SystemSpec) -> Vec<NodeRole> {
    let n = traj.times.len();
    let pieces = sched.pieces(spec.u_bound);
    let piece_role = |i: usize| -> NodeRole {
        match (pieces[i].kind, sched) {
            (Some(SegmentKind::Singular), _) => NodeRole::Singular,
            (Some(_), _) => NodeRole::Bang,
            (None, ControlSchedule::Sampled { .. }) => {
                let u = traj.controls[traj.spans[i].start_node];
                if u.abs() >= spec.u_bound * (1.0 - 1e-12) {
                    NodeRole::Bang
                } else {
                    NodeRole::Singular
                }
            }
            (None, _) => NodeRole::Bang,
        }
    };
    let mut roles = vec![NodeRole::Skip; n];
    let mut boundaries = Vec::new();
    let mut prev: Option<(NodeRole, f64)> = None;
    for (i, span) in traj.spans.iter().enumerate() {
        if span.end_node == span.start_node {
            continue;
        }
        let role = piece_role(i);
        let u = traj.controls[span.start_node];
        for r in roles.iter_mut().take(span.end_node + 1).skip(span.start_node) {
            *r = role;
        }
        if let Some((prole, pu)) = prev {
            let differs = match role {
                NodeRole::Singular => prole != role,
                _ => prole != role || pu != u,
            };
            if differs {
                boundaries.push(span.start_node);
            }
        }
        prev = Some((role, u));
    }
    for b in boundaries {
        let lo = b.saturating_sub(SWITCH_EXCLUSION_STEPS);
        let hi = (b + SWITCH_EXCLUSION_STEPS).min(n - 1);
        for r in &mut roles[lo..=hi] {
            *r = NodeRole::Skip;
        }
    }
    roles
}

/// Evaluates the necessary conditions along a forward/backward pair.
pub fn verify(
    traj: &Trajectory,
    costates: &CostateTrajectory,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    tol_hc: f64,
    tol_phi: f64,
) -> Result<OptimalityReport> {
    let n = traj.times.len();
    if costates.times.len() != n || costates.costates.len() != n || traj.states.len() != n {
        return Err(Error::GridMismatch(format!(
            "state grid has {n} nodes, costate grid {}",
            costates.times.len()
        )));
    }
    if traj.spans.len() != sched.pieces(spec.u_bound).len() {
        return Err(Error::GridMismatch(
            "trajectory was not produced from this schedule".into(),
        ));
    }
    let mut hc = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for k in 0..n {
        let (lam, rho, u) = (&costates.costates[k], &traj.states[k], traj.controls[k]);
        hc.push(control_hamiltonian(lam, rho, u, spec));
        phi.push(switching_function(lam, rho, spec));
    }
    let hc_mean = hc.iter().sum::<f64>() / n as f64;
    let hc_drift = hc.iter().map(|h| (h - hc_mean).abs()).fold(0.0, f64::max);

    let roles = node_roles(traj, sched, spec);
    let mut bang_violations = 0;
    let mut worst_bang_margin = f64::NEG_INFINITY;
    let mut singular_residual: f64 = 0.0;
    for k in 0..n {
        match roles[k] {
            NodeRole::Bang => {
                let margin = traj.controls[k].signum() * phi[k];
                worst_bang_margin = worst_bang_margin.max(margin);
                if margin > tol_phi {
                    bang_violations += 1;
                }
            }
            NodeRole::Singular => singular_residual = singular_residual.max(phi[k].abs()),
            NodeRole::Skip => {}
        }
    }
    if worst_bang_margin == f64::NEG_INFINITY {
        worst_bang_margin = 0.0;
    }
    let passed = hc_drift <= tol_hc && bang_violations == 0 && singular_residual <= tol_phi;
    Ok(OptimalityReport {
        times: traj.times.clone(),
        hc_samples: hc,
        phi_samples: phi,
        hc_mean,
        hc_drift,
        bang_violations,
        worst_bang_margin,
        singular_residual,
        hc_sign: HcSign::classify(hc_mean, tol_hc),
        tol_hc,
        tol_phi,
        passed,
    })
}

/// Forward state and backward costate for a schedule, with the costate
/// boundary set from the terminal cost.
#[derive(Clone, Debug)]
pub struct Extremal {
    pub trajectory: Trajectory,
    pub costates: CostateTrajectory,
    pub cost: f64,
}

pub fn extremal(
    rho0: BlochVector,
    target: &BlochVector,
    kind: CostKind,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    dt_max: f64,
) -> Result<Extremal> {
    let trajectory = evolve_state(rho0, sched, spec, dt_max)?;
    let rho_tf = trajectory.final_state();
    let costates = evolve_costate(terminal_gradient(&rho_tf, target, kind), &trajectory, spec)?;
    Ok(Extremal {
        cost: terminal_cost(&rho_tf, target, kind),
        trajectory,
        costates,
    })
}

/// Gradient of the terminal cost with respect to the samples of a sampled
/// schedule: the switching function integrated over each hold cell
/// (Simpson's rule on the integrator grid, trapezoid for odd step counts).
/// For a smooth `Φ` this is `Φ(t_k)·Δt` to leading order.
pub fn sampled_gradient(
    traj: &Trajectory,
    costates: &CostateTrajectory,
    spec: &SystemSpec,
) -> Result<Vec<f64>> {
    if costates.costates.len() != traj.states.len() {
        return Err(Error::GridMismatch("state and costate grids differ".into()));
    }
    let phi: Vec<f64> = costates
        .costates
        .iter()
        .zip(&traj.states)
        .map(|(l, r)| switching_function(l, r, spec))
        .collect();
    Ok(traj
        .spans
        .iter()
        .map(|span| {
            let (a, b) = (span.start_node, span.end_node);
            let m = b - a;
            if m == 0 {
                return 0.0;
            }
            let h = (traj.times[b] - traj.times[a]) / m as f64;
            if m % 2 == 0 {
                let mut s = phi[a] + phi[b];
                for (j, p) in phi[a + 1..b].iter().enumerate() {
                    s += if j % 2 == 0 { 4.0 * p } else { 2.0 * p };
                }
                s * h / 3.0
            } else {
                let inner: f64 = phi[a + 1..b].iter().sum();
                (0.5 * (phi[a] + phi[b]) + inner) * h
            }
        })
        .collect())
}

/// Terminal cost and its gradient with respect to the samples.
pub fn cost_and_gradient(
    rho0: BlochVector,
    target: &BlochVector,
    kind: CostKind,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    dt_max: f64,
) -> Result<(f64, Vec<f64>)> {
    if !matches!(sched, ControlSchedule::Sampled { .. }) {
        return Err(Error::InvalidSchedule(
            "gradient requires a sampled schedule".into(),
        ));
    }
    let ex = extremal(rho0, target, kind, sched, spec, dt_max)?;
    let grad = sampled_gradient(&ex.trajectory, &ex.costates, spec)?;
    Ok((ex.cost, grad))
}
