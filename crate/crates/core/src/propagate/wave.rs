//! Closed-system Schrödinger propagation `i dΨ/dt = (H0 + u Hd) Ψ` on the
//! same grid as the Bloch integrator.

use num_complex::Complex64;

use super::integrate::{PieceSpan, Trajectory};
use super::schedule::{steps_for, ControlSchedule, PieceControl};
use crate::error::{Error, Result};
use crate::geometry::SingularLaw;
use crate::model::{bloch_from_pure, PureState, SystemSpec};

type Amp = [Complex64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct WaveTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    pub controls: Vec<f64>,
    pub stage_controls: Vec<[f64; 3]>,
    pub spans: Vec<PieceSpan>,
}

/// `−i H(u) ψ` with `H = (1 + uξ) σx + u σz`.
#[inline]
fn rhs(spec: &SystemSpec, u: f64, psi: &Amp) -> Amp {
    let hx = 1.0 + u * spec.xi;
    let hz = u;
    let minus_i = Complex64::new(0.0, -1.0);
    [
        minus_i * (psi[1] * hx + psi[0] * hz),
        minus_i * (psi[0] * hx - psi[1] * hz),
    ]
}

#[inline]
fn axpy(a: &Amp, k: &Amp, s: f64) -> Amp {
    [a[0] + k[0] * s, a[1] + k[1] * s]
}

fn rk4(spec: &SystemSpec, psi: &Amp, us: [f64; 3], h: f64) -> Amp {
    let k1 = rhs(spec, us[0], psi);
    let k2 = rhs(spec, us[1], &axpy(psi, &k1, h / 2.0));
    let k3 = rhs(spec, us[1], &axpy(psi, &k2, h / 2.0));
    let k4 = rhs(spec, us[2], &axpy(psi, &k3, h));
    [
        psi[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0),
        psi[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0),
    ]
}

fn to_state(a: &Amp) -> PureState {
    PureState { c0: a[0], c1: a[1] }
}

fn require_closed(spec: &SystemSpec) -> Result<()> {
    if spec.is_closed() {
        Ok(())
    } else {
        Err(Error::Dissipative(spec.channel.to_string()))
    }
}

/// Propagates a pure state. Singular segments use the Bloch-vector feedback
/// law evaluated on the Bloch projection of each stage state.
pub fn evolve_wavefunction(
    psi0: &PureState,
    sched: &ControlSchedule,
    spec: &SystemSpec,
    dt_max: f64,
) -> Result<WaveTrajectory> {
    require_closed(spec)?;
    if !(dt_max.is_finite() && dt_max > 0.0) {
        return Err(Error::InvalidSchedule(format!("dt_max must be > 0, got {dt_max}")));
    }
    bloch_from_pure(psi0)?;
    sched.validate()?;
    let law = sched.has_singular().then(|| SingularLaw::new(spec));

    let mut psi: Amp = [psi0.c0, psi0.c1];
    let mut times = vec![0.0];
    let mut states = vec![*psi0];
    let mut controls = Vec::new();
    let mut stage_controls = Vec::new();
    let mut spans = Vec::new();

    for piece in sched.pieces(spec.u_bound) {
        let n = steps_for(piece.duration, dt_max);
        let start_node = times.len() - 1;
        let h = if n > 0 { piece.duration / n as f64 } else { 0.0 };
        for k in 0..n {
            let tk = piece.start + k as f64 * h;
            let us = match piece.control {
                PieceControl::Constant(u) => {
                    psi = rk4(spec, &psi, [u; 3], h);
                    [u; 3]
                }
                PieceControl::Feedback => {
                    let law = law.as_ref().expect("law built for singular schedules");
                    let u_of = |a: &Amp, t: f64| -> Result<f64> {
                        let n = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
                        let s = PureState {
                            c0: a[0] / n,
                            c1: a[1] / n,
                        };
                        let rho = bloch_from_pure(&s)?;
                        law.evaluate(&rho.0)
                            .map(|e| e.u_applied)
                            .map_err(|e| Error::SingularFailure {
                                time: t,
                                source: Box::new(e),
                            })
                    };
                    let u1 = u_of(&psi, tk)?;
                    let k1 = rhs(spec, u1, &psi);
                    let x2 = axpy(&psi, &k1, h / 2.0);
                    let u2 = u_of(&x2, tk + h / 2.0)?;
                    let k2 = rhs(spec, u2, &x2);
                    let x3 = axpy(&psi, &k2, h / 2.0);
                    let u3 = u_of(&x3, tk + h / 2.0)?;
                    let k3 = rhs(spec, u3, &x3);
                    let x4 = axpy(&psi, &k3, h);
                    let u4 = u_of(&x4, tk + h)?;
                    let k4 = rhs(spec, u4, &x4);
                    psi = [
                        psi[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0),
                        psi[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0),
                    ];
                    [u1, 0.5 * (u2 + u3), u4]
                }
            };
            controls.push(us[0]);
            stage_controls.push(us);
            times.push(if k + 1 == n {
                piece.start + piece.duration
            } else {
                piece.start + (k + 1) as f64 * h
            });
            states.push(to_state(&psi));
        }
        spans.push(PieceSpan {
            kind: piece.kind,
            start_node,
            end_node: times.len() - 1,
        });
    }
    controls.push(stage_controls.last().map(|s| s[2]).unwrap_or(0.0));

    Ok(WaveTrajectory {
        times,
        states,
        controls,
        stage_controls,
        spans,
    })
}

/// Backward propagation of the wave-function costate `|Π⟩`, which obeys the
/// same Schrödinger equation, from `|Π(t_f)⟩ = −|ψ_f⟩⟨ψ_f|Ψ(t_f)⟩`.
pub fn evolve_wave_costate(
    target: &PureState,
    realized: &WaveTrajectory,
    spec: &SystemSpec,
) -> Result<Vec<PureState>> {
    require_closed(spec)?;
    let n = realized.times.len();
    if n == 0 || realized.states.len() != n || realized.stage_controls.len() + 1 != n {
        return Err(Error::GridMismatch("wave trajectory is inconsistent".into()));
    }
    let last = realized.states[n - 1];
    let overlap = target.inner(&last);
    let mut pi: Amp = [-target.c0 * overlap, -target.c1 * overlap];
    let mut out = vec![to_state(&pi); n];
    for k in (0..n - 1).rev() {
        let h = realized.times[k + 1] - realized.times[k];
        let [a, m, b] = realized.stage_controls[k];
        pi = rk4(spec, &pi, [b, m, a], -h);
        out[k] = to_state(&pi);
    }
    Ok(out)
}

impl WaveTrajectory {
    /// Bloch projection as a Bloch trajectory (controls and grid shared).
    pub fn to_bloch(&self) -> Result<Trajectory> {
        Ok(Trajectory {
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(bloch_from_pure)
                .collect::<Result<Vec<_>>>()?,
            controls: self.controls.clone(),
            stage_controls: self.stage_controls.clone(),
            spans: self.spans.clone(),
        })
    }
}
