use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A specification field is outside its physical domain.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    /// Cavity length at or beyond the concentric limit `2 R_c`.
    #[error("cavity length {length:e} m is not below 2·R_c = {limit:e} m (geometrically unstable)")]
    UnstableGeometry { length: f64, limit: f64 },

    /// Drift matrix is not Hurwitz; no stationary state exists.
    #[error("linear model is not stable (spectral abscissa {abscissa:e} s⁻¹)")]
    Unstable { abscissa: f64 },

    #[error("Lyapunov system is singular to working precision")]
    Singular,

    /// The computed covariance violates positivity beyond numerical tolerance.
    #[error("stationary covariance is not positive semidefinite (min eigenvalue {min:e}, max {max:e})")]
    NotPositive { min: f64, max: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

impl Error {
    pub(crate) fn spec(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by a malformed input rather than by the physics
    /// of a well-formed one.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec { .. } | Error::InvalidSimConfig(_) | Error::InvalidSweep(_)
        )
    }
}
