use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error(
        "quadrature did not converge: worst interval [{lo}, {hi}] has error estimate {error:e} \
         (requested {requested:e})"
    )]
    Tolerance {
        lo: f64,
        hi: f64,
        error: f64,
        requested: f64,
    },

    /// The ODE integrator could not continue (step size underflow or a non-finite rate).
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A rate function returned a non-finite value away from any declared singular point.
    #[error("rate {rate} is not evaluable at t = {t}")]
    NotEvaluable { rate: &'static str, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
