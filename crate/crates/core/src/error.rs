use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Raised instead of silently propagating NaN/inf through norms and
    /// field assembly. Blow-up mid-run is a reported outcome, not this error.
    #[error("state contains non-finite samples")]
    BlownUpState,

    #[error("time step {dt:e} exceeds the advection limit {dt_max:e}")]
    CflViolation { dt: f64, dt_max: f64 },

    /// Particle ordering violated: trajectories crossed or left one period.
    /// The characteristic map stays monotone for classical solutions, so
    /// this is the discrete signature of breakdown.
    #[error("particle trajectories crossed")]
    ParticleCollision,

    #[error("crest tracking failed: {0}")]
    TrackingFailure(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
