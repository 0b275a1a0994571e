use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `|sum(Y_c) + Y_L|` vanished, so the bus voltage is undefined.
    #[error("singular network: total admittance magnitude {magnitude:e} is below {threshold:e}")]
    SingularNetwork { magnitude: f64, threshold: f64 },

    #[error("degenerate linearization: power factor angle sensitivity denominator {denominator:e} is below {threshold:e} (zero load?)")]
    DegenerateLinearization { denominator: f64, threshold: f64 },

    #[error("state is not an equilibrium: rotating-frame frequency spread {spread:e} rad/s exceeds {threshold:e}")]
    NotAnEquilibrium { spread: f64, threshold: f64 },

    #[error("numerical blowup at step {step} (t = {time} s): |d(delta)/dt| = {rate:e} rad/s")]
    NumericalBlowup { step: usize, time: f64, rate: f64 },

    #[error("string admittances differ (string {index} vs string 1); the equal-line analysis does not apply")]
    HeterogeneousLines { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid value: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
