use thiserror::Error;

/// Errors raised by the simulation and analysis kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("basis state not found in truncated space: {0}")]
    NotFound(String),

    #[error("numerical integrity violated: {0}")]
    NumericalIntegrity(String),

    #[error("integration failure at t = {t} ns (dt = {dt} ns): {reason}")]
    IntegrationFailure { t: f64, dt: f64, reason: String },

    #[error("degenerate jump at t = {t} ns: all channel weights below threshold")]
    DegenerateJump { t: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("support violation: Q[{k}] = 0 while P[{k}] > 0")]
    SupportViolation { k: usize },

    #[error("degenerate reference distribution: KL(ideal, reference) = {0}")]
    DegenerateReference(f64),

    #[error("insufficient samples: {count} qualifying, {required} required")]
    InsufficientSamples { count: usize, required: usize },
}

impl Error {
    /// Errors that stem from floating-point trouble rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericalIntegrity(_)
                | Error::IntegrationFailure { .. }
                | Error::DegenerateJump { .. }
                | Error::SupportViolation { .. }
                | Error::DegenerateReference(_)
                | Error::InsufficientSamples { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
