//! Crate-wide error type.

/// Errors surfaced by construction, validation and integration routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cavity truncation n_max = {0} outside the supported range 1..=4096")]
    InvalidTruncation(usize),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("state vector not normalized: ‖ψ‖ deviates from 1 by {0:.3e}")]
    NotNormalized(f64),

    #[error("not a physical density operator: {0}")]
    NotDensity(String),

    #[error("coherent amplitude too large for the truncation: |α|² = {0:.4} exceeds n_max/4 = {1:.4}")]
    CoherentTooLarge(f64, f64),

    #[error("parameter out of range: {0}")]
    BadParameter(String),

    #[error("modulation schedule rejected: {0}")]
    BadSchedule(String),

    #[error("regime not applicable: {0}")]
    BadRegime(String),

    #[error("integrator step size underflow at t = {t:.6e} (1/g₀ units): {hint}")]
    StepUnderflow { t: f64, hint: String },

    #[error("no interior transfer maximum inside the search window [{0:.6}, {1:.6}] g₀")]
    AmbiguousResonance(f64, f64),

    #[error("no closed-form steady state printed for {0}")]
    SteadyStateUnavailable(String),

}

pub type Result<T> = std::result::Result<T, Error>;
