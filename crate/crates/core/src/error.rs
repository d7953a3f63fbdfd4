use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system spec: {0}")]
    InvalidSpec(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid protocol structure {label:?}: {reason}")]
    InvalidStructure { label: String, reason: String },

    #[error("state too close to a pole of the (theta, phi) chart: theta = {theta}")]
    PoleProximity { theta: f64 },

    #[error("singular arc parameter undefined at phi = {phi} (sin phi = 0)")]
    ArcUndefined { phi: f64 },

    #[error("degenerate bracket basis at rho = {rho:?} (condition number {condition:.3e})")]
    DegenerateBasis { rho: [f64; 3], condition: f64 },

    #[error("singular control undefined at rho = {rho:?}: denominator {denominator:.3e}")]
    SingularUndefined { rho: [f64; 3], denominator: f64 },

    #[error("singular feedback jumps across a pole near rho = {rho:?} ({before:.3e} -> {after:.3e})")]
    SingularPole { rho: [f64; 3], before: f64, after: f64 },

    #[error("singular feedback failed at t = {time}: {source}")]
    SingularFailure {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wave-function picture requires a closed system (channel {0})")]
    Dissipative(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
