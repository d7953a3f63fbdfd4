use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ durations = t_f` for segmented schedules.
pub const DURATION_SUM_TOL: f64 = 1e-12;

/// Kind of a protocol segment. `X` is the lower bang (`u = −u_bound`),
/// `Y` the upper bang (`u = +u_bound`) and `S` a singular arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    #[serde(rename = "X", alias = "x", alias = "bang_minus")]
    BangMinus,
    #[serde(rename = "Y", alias = "y", alias = "bang_plus")]
    BangPlus,
    #[serde(rename = "S", alias = "s", alias = "singular")]
    Singular,
}

impl SegmentKind {
    pub fn letter(self) -> char {
        match self {
            SegmentKind::BangMinus => 'X',
            SegmentKind::BangPlus => 'Y',
            SegmentKind::Singular => 'S',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'X' => Some(SegmentKind::BangMinus),
            'Y' => Some(SegmentKind::BangPlus),
            'S' => Some(SegmentKind::Singular),
            _ => None,
        }
    }

    /// Fixed control value of a bang segment.
    pub fn bang_value(self, u_bound: f64) -> Option<f64> {
        match self {
            SegmentKind::BangMinus => Some(-u_bound),
            SegmentKind::BangPlus => Some(u_bound),
            SegmentKind::Singular => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

impl Segment {
    pub fn new(kind: SegmentKind, duration: f64) -> Self {
        Self { kind, duration }
    }
}

/// Control protocol: bang/singular segments, or a zero-order-hold waveform
/// of `N` samples on a uniform grid of `[0, t_f]` (sample `k` holds on
/// `[k Δt, (k+1) Δt)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSchedule {
    Segmented { segments: Vec<Segment> },
    Sampled { tf: f64, u: Vec<f64> },
}

/// How the control is realized on a piece of the schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceControl {
    Constant(f64),
    Feedback,
}

/// Maximal time interval on which the control rule does not change.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub duration: f64,
    pub control: PieceControl,
    /// Segment kind for segmented schedules.
    pub kind: Option<SegmentKind>,
}

impl ControlSchedule {
    pub fn segmented(segments: Vec<Segment>) -> Result<Self> {
        let s = ControlSchedule::Segmented { segments };
        s.validate()?;
        Ok(s)
    }

    /// Builds a sampled schedule, clipping every sample into `±u_bound`.
    pub fn sampled(tf: f64, u: Vec<f64>, u_bound: f64) -> Result<Self> {
        let s = ControlSchedule::Sampled {
            tf,
            u: u.into_iter().map(|v| v.clamp(-u_bound, u_bound)).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Convenience constructor from kinds and durations.
    pub fn from_parts(kinds: &[SegmentKind], durations: &[f64]) -> Result<Self> {
        if kinds.len() != durations.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} kinds but {} durations",
                kinds.len(),
                durations.len()
            )));
        }
        Self::segmented(
            kinds
                .iter()
                .zip(durations)
                .map(|(&k, &d)| Segment::new(k, d))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControlSchedule::Segmented { segments } => {
                if segments.is_empty() {
                    return Err(Error::InvalidSchedule("no segments".into()));
                }
                for s in segments {
                    if !(s.duration.is_finite() && s.duration >= 0.0) {
                        return Err(Error::InvalidSchedule(format!(
                            "segment duration must be finite and >= 0, got {}",
                            s.duration
                        )));
                    }
                }
            }
            ControlSchedule::Sampled { tf, u } => {
                if !(tf.is_finite() && *tf > 0.0) {
                    return Err(Error::InvalidSchedule(format!("tf must be > 0, got {tf}")));
                }
                if u.is_empty() {
                    return Err(Error::InvalidSchedule("no control samples".into()));
                }
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSchedule("non-finite control sample".into()));
                }
            }
        }
        Ok(())
    }

    /// Total duration `t_f`.
    pub fn duration(&self) -> f64 {
        match self {
            ControlSchedule::Segmented { segments } => segments.iter().map(|s| s.duration).sum(),
            ControlSchedule::Sampled { tf, .. } => *tf,
        }
    }

    pub fn has_singular(&self) -> bool {
        matches!(self, ControlSchedule::Segmented { segments }
            if segments.iter().any(|s| s.kind == SegmentKind::Singular))
    }

    /// Pieces in time order. Sample values are clipped to `±u_bound`.
    pub fn pieces(&self, u_bound: f64) -> Vec<Piece> {
        match self {
            ControlSchedule::Segmented { segments } => {
                let mut start = 0.0;
                segments
                    .iter()
                    .map(|s| {
                        let p = Piece {
                            start,
                            duration: s.duration,
                            control: match s.kind.bang_value(u_bound) {
                                Some(u) => PieceControl::Constant(u),
                                None => PieceControl::Feedback,
                            },
                            kind: Some(s.kind),
                        };
                        start += s.duration;
                        p
                    })
                    .collect()
            }
            ControlSchedule::Sampled { tf, u } => {
                let dt = tf / u.len() as f64;
                u.iter()
                    .enumerate()
                    .map(|(k, &v)| Piece {
                        start: k as f64 * dt,
                        duration: dt,
                        control: PieceControl::Constant(v.clamp(-u_bound, u_bound)),
                        kind: None,
                    })
                    .collect()
            }
        }
    }

    /// Interior switching times (segment boundaries) of a segmented schedule.
    pub fn switch_times(&self) -> Vec<f64> {
        match self {
            ControlSchedule::Segmented { segments } => {
                let mut t = 0.0;
                let mut out = Vec::with_capacity(segments.len().saturating_sub(1));
                for s in &segments[..segments.len().saturating_sub(1)] {
                    t += s.duration;
                    out.push(t);
                }
                out
            }
            ControlSchedule::Sampled { .. } => Vec::new(),
        }
    }
}

/// Number of integrator steps for a piece: the smallest count with step
/// `≤ dt_max`, zero for empty pieces.
#[inline]
pub fn steps_for(duration: f64, dt_max: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        ((duration / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}
