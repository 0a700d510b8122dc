use thiserror::Error;

/// Errors raised by the models, fits and signal processing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("junction exponent v_be/v_teff = {ratio:.1} exceeds cap {cap}")]
    ExponentOverflow { ratio: f64, cap: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bias network has no valid DC path: {0}")]
    NoDcPath(String),

    #[error("operating point did not converge after {iterations} iterations (last residual {residual:.3e} A)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("input mismatch: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("noise accumulation undefined: stage {stage} has zero gain at {frequency:.3e} Hz")]
    ZeroGainStage { stage: usize, frequency: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Parse { .. }
                | Error::Input(_)
                | Error::Config(_)
                | Error::Range(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
