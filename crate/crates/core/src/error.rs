use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A grid, rule or run parameter is unsupported or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Operation inputs have the wrong shape or are out of range.
    #[error("input error: {0}")]
    Input(String),
    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A function was evaluated outside of its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The temporal spectrum is too small to divide by at `frequency`.
    #[error("cannot deconvolve at w = {frequency}: |g_hat| = {magnitude:e} is below the threshold {threshold:e}")]
    Deconvolution { frequency: f64, magnitude: f64, threshold: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
