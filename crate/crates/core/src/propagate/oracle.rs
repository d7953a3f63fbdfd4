use super::schedule::{ControlSchedule, PieceControl};
use crate::error::{Error, Result};
use crate::model::{generator, BlochVector, SystemSpec};

/// Exact propagation of a piecewise-constant schedule by one matrix
/// exponential per piece. Singular segments are rejected.
pub fn expm_oracle(
    rho0: BlochVector,
    sched: &ControlSchedule,
    spec: &SystemSpec,
) -> Result<BlochVector> {
    sched.validate()?;
    let mut rho = rho0.0;
    for piece in sched.pieces(spec.u_bound) {
        let u = match piece.control {
            PieceControl::Constant(u) => u,
            PieceControl::Feedback => {
                return Err(Error::InvalidSchedule(
                    "matrix-exponential propagation needs constant controls".into(),
                ))
            }
        };
        if piece.duration > 0.0 {
            rho = (generator(spec, u) * piece.duration).exp() * rho;
        }
    }
    Ok(BlochVector(rho))
}
