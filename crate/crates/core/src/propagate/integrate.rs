//! Fixed-step classical RK4 on the Bloch ball.
//!
//! Every piece of a schedule is split into equal steps no longer than
//! `dt_max`, so segment boundaries are grid points. On constant-control
//! pieces the dynamics are linear with a constant generator and one RK4 step
//! is the matrix polynomial `I + hM + (hM)²/2 + (hM)³/6 + (hM)⁴/24`; this is
//! applied directly. Singular pieces evaluate the feedback law at every
//! stage state.

use nalgebra::{Matrix3, Vector3};

use super::schedule::{steps_for, ControlSchedule, PieceControl, SegmentKind};
use crate::error::{Error, Result};
use crate::geometry::SingularLaw;
use crate::model::{drift_field, drive_field, BlochVector, CostateVector, SystemSpec};

/// Default number of integrator steps over `[0, t_f]`.
pub const DEFAULT_STEPS: usize = 4096;

/// `t_f / 4096`
pub fn default_dt(tf: f64) -> f64 {
    tf / DEFAULT_STEPS as f64
}

/// Grid span of one schedule piece.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieceSpan {
    pub kind: Option<SegmentKind>,
    pub start_node: usize,
    pub end_node: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    /// Realized control at each node (the control of the step leaving the
    /// node; the last node repeats the final stage control).
    pub controls: Vec<f64>,
    /// Per step: control at the start, at the midpoint (mean of the two
    /// midpoint stages) and at the end.
    pub stage_controls: Vec<[f64; 3]>,
    pub spans: Vec<PieceSpan>,
}

impl Trajectory {
    pub fn final_state(&self) -> BlochVector {
        *self.states.last().expect("trajectory has at least one node")
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    fn check(&self) -> Result<()> {
        let n = self.times.len();
        if n == 0
            || self.states.len() != n
            || self.controls.len() != n
            || self.stage_controls.len() + 1 != n
        {
            return Err(Error::GridMismatch(format!(
                "times {}, states {}, controls {}, steps {}",
                n,
                self.states.len(),
                self.controls.len(),
                self.stage_controls.len()
            )));
        }
        if self.times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::GridMismatch("times are not monotone".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostateTrajectory {
    pub times: Vec<f64>,
    pub costates: Vec<CostateVector>,
}

/// Constant generators of the control-affine dynamics.
#[derive(Clone, Debug)]
pub(crate) struct Generators {
    pub f: Matrix3<f64>,
    pub g: Matrix3<f64>,
}

impl Generators {
    pub fn new(spec: &SystemSpec) -> Self {
        Self {
            f: drift_field(spec).0,
            g: drive_field(spec).0,
        }
    }

    #[inline]
    pub fn at(&self, u: f64) -> Matrix3<f64> {
        self.f + self.g * u
    }
}

/// One RK4 step of `x' = M x` as a matrix.
#[inline]
pub(crate) fn rk4_step_matrix(m: &Matrix3<f64>, h: f64) -> Matrix3<f64> {
    let a = m * h;
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Matrix3::identity() + a + a2 * 0.5 + a3 * (1.0 / 6.0) + a4 * (1.0 / 24.0)
}

/// `m^n` by binary powering.
fn matrix_power(m: &Matrix3<f64>, mut n: usize) -> Matrix3<f64> {
    let mut result = Matrix3::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            result = base * result;
        }
        base = base * base;
        n >>= 1;
    }
    result
}

/// Last unclamped feedback value seen on a singular piece. A sign change
/// between two values beyond the bound means the law passed through a pole,
/// where clamping would otherwise chatter between the two bangs.
struct PoleGuard {
    last: Option<f64>,
    bound: f64,
}

impl PoleGuard {
    fn new(bound: f64) -> Self {
        Self { last: None, bound }
    }

    fn check(&mut self, raw: f64, rho: &Vector3<f64>) -> Result<()> {
        if let Some(prev) = self.last {
            if prev.abs() > self.bound && raw.abs() > self.bound && prev.signum() != raw.signum() {
                return Err(Error::SingularPole {
                    rho: [rho.x, rho.y, rho.z],
                    before: prev,
                    after: raw,
                });
            }
        }
        self.last = Some(raw);
        Ok(())
    }
}

/// Feedback RK4 step; returns the new state and the four stage controls.
#[inline]
fn feedback_step(
    gens: &Generators,
    law: &SingularLaw,
    guard: &mut PoleGuard,
    rho: &Vector3<f64>,
    t: f64,
    h: f64,
) -> Result<(Vector3<f64>, [f64; 4])> {
    let mut u_at = |x: &Vector3<f64>, tt: f64| {
        law.evaluate(x)
            .and_then(|e| guard.check(e.u_raw, x).map(|_| e.u_applied))
            .map_err(|e| Error::SingularFailure {
                time: tt,
                source: Box::new(e),
            })
    };
    let u1 = u_at(rho, t)?;
    let k1 = gens.at(u1) * rho;
    let x2 = rho + k1 * (h / 2.0);
    let u2 = u_at(&x2, t + h / 2.0)?;
    let k2 = gens.at(u2) * x2;
    let x3 = rho + k2 * (h / 2.0);
    let u3 = u_at(&x3, t + h / 2.0)?;
    let k3 = gens.at(u3) * x3;
    let x4 = rho + k3 * h;
    let u4 = u_at(&x4, t + h)?;
    let k4 = gens.at(u4) * x4;
    Ok((rho + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0), [u1, u2, u3, u4]))
}

fn check_dt(dt_max: f64) -> Result<()> {
    if dt_max.is_finite() && dt_max > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("dt_max must be > 0, got {dt_max}")))
    }
}

/// Integrates `dρ/dt = 2h×ρ − ΓPρ` under `sched` and records the full
/// trajectory.
pub fn evolve_state(
    rho0: BlochVector,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    dt_max: f64,
) -> Result<Trajectory> {
    check_dt(dt_max)?;
    sched.validate()?;
    let gens = Generators::new(spec);
    let law = sched.has_singular().then(|| SingularLaw::new(spec));

    let pieces = sched.pieces(spec.u_bound);
    let total_steps: usize = pieces.iter().map(|p| steps_for(p.duration, dt_max)).sum();
    let mut times = Vec::with_capacity(total_steps + 1);
    let mut states = Vec::with_capacity(total_steps + 1);
    let mut controls = Vec::with_capacity(total_steps + 1);
    let mut stage_controls = Vec::with_capacity(total_steps);
    let mut spans = Vec::with_capacity(pieces.len());

    let mut rho = rho0.0;
    let mut t = 0.0;
    times.push(t);
    states.push(rho0);

    for piece in &pieces {
        let n = steps_for(piece.duration, dt_max);
        let start_node = times.len() - 1;
        if n > 0 {
            let h = piece.duration / n as f64;
            match piece.control {
                PieceControl::Constant(u) => {
                    let step = rk4_step_matrix(&gens.at(u), h);
                    for k in 0..n {
                        rho = step * rho;
                        controls.push(u);
                        stage_controls.push([u; 3]);
                        times.push(piece.start + (k + 1) as f64 * h);
                        states.push(BlochVector(rho));
                    }
                }
                PieceControl::Feedback => {
                    let law = law.as_ref().expect("law built for singular schedules");
                    let mut guard = PoleGuard::new(spec.u_bound);
                    for k in 0..n {
                        let tk = piece.start + k as f64 * h;
                        let (next, us) = feedback_step(&gens, law, &mut guard, &rho, tk, h)?;
                        rho = next;
                        controls.push(us[0]);
                        stage_controls.push([us[0], 0.5 * (us[1] + us[2]), us[3]]);
                        times.push(piece.start + (k + 1) as f64 * h);
                        states.push(BlochVector(rho));
                    }
                }
            }
            t = piece.start + piece.duration;
            if let Some(last) = times.last_mut() {
                *last = t;
            }
        }
        spans.push(PieceSpan {
            kind: piece.kind,
            start_node,
            end_node: times.len() - 1,
        });
    }

    let last_u = stage_controls
        .last()
        .map(|s| s[2])
        .unwrap_or_else(|| match pieces.first().map(|p| p.control) {
            Some(PieceControl::Constant(u)) => u,
            _ => 0.0,
        });
    controls.push(last_u);

    Ok(Trajectory {
        times,
        states,
        controls,
        stage_controls,
        spans,
    })
}

/// Terminal state only. Same grid and arithmetic as [`evolve_state`], with
/// constant pieces collapsed into matrix powers.
pub fn terminal_state(
    rho0: BlochVector,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    dt_max: f64,
) -> Result<BlochVector> {
    check_dt(dt_max)?;
    let gens = Generators::new(spec);
    let law = sched.has_singular().then(|| SingularLaw::new(spec));
    let mut rho = rho0.0;
    for piece in sched.pieces(spec.u_bound) {
        let n = steps_for(piece.duration, dt_max);
        if n == 0 {
            continue;
        }
        let h = piece.duration / n as f64;
        match piece.control {
            PieceControl::Constant(u) => {
                rho = matrix_power(&rk4_step_matrix(&gens.at(u), h), n) * rho;
            }
            PieceControl::Feedback => {
                let law = law.as_ref().expect("law built for singular schedules");
                let mut guard = PoleGuard::new(spec.u_bound);
                for k in 0..n {
                    let tk = piece.start + k as f64 * h;
                    rho = feedback_step(&gens, law, &mut guard, &rho, tk, h)?.0;
                }
            }
        }
    }
    Ok(BlochVector(rho))
}

/// Integrates `dλ/dt = 2h×λ + ΓPλ` backward from `λ(t_f)` on the grid of
/// `realized`, reusing its realized controls.
pub fn evolve_costate(
    lambda_tf: CostateVector,
    realized: &Trajectory,
    spec: &SystemSpec,
) -> Result<CostateTrajectory> {
    realized.check()?;
    let gens = Generators::new(spec);
    let n = realized.times.len();
    let mut costates = vec![CostateVector::zeros(); n];
    costates[n - 1] = lambda_tf;
    let mut lam = lambda_tf.0;
    for k in (0..n - 1).rev() {
        let h = realized.times[k + 1] - realized.times[k];
        let [u_start, u_mid, u_end] = realized.stage_controls[k];
        if u_start == u_mid && u_mid == u_end {
            lam = rk4_step_matrix(&gens.at(u_start).transpose(), h) * lam;
        } else {
            // reversed time s = t_f − t: dλ/ds = Mᵀ λ
            let m_end = gens.at(u_end).transpose();
            let m_mid = gens.at(u_mid).transpose();
            let m_start = gens.at(u_start).transpose();
            let k1 = m_end * lam;
            let k2 = m_mid * (lam + k1 * (h / 2.0));
            let k3 = m_mid * (lam + k2 * (h / 2.0));
            let k4 = m_start * (lam + k3 * h);
            lam += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        costates[k] = CostateVector(lam);
    }
    Ok(CostateTrajectory {
        times: realized.times.clone(),
        costates,
    })
}
