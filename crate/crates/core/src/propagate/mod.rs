//! Forward and backward propagation of states, costates and wave functions
//! under a [`ControlSchedule`], plus terminal costs.

mod cost;
mod integrate;
mod oracle;
mod schedule;
mod wave;

pub use cost::{terminal_cost, terminal_gradient, CostKind};
pub use integrate::{
    default_dt, evolve_costate, evolve_state, terminal_state, CostateTrajectory, PieceSpan,
    Trajectory, DEFAULT_STEPS,
};
pub use oracle::expm_oracle;
pub use schedule::{
    steps_for, ControlSchedule, Piece, PieceControl, Segment, SegmentKind, DURATION_SUM_TOL,
};
pub use wave::{evolve_wave_costate, evolve_wavefunction, WaveTrajectory};
