use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter radius R = {radius} is too small, witness needs {required}")]
    RTooSmall { radius: f64, required: f64 },

    #[error("resolution too coarse: element of length {length} exceeds the cap {cap}")]
    ResolutionTooCoarse { length: f64, cap: f64 },

    #[error("re-subdivision exceeded max depth {max_depth}")]
    SubdivisionDepth { max_depth: usize },

    #[error("evaluation map is not a submersion here (NJ = {normal_jacobian:e})")]
    SubmersionFailure { normal_jacobian: f64 },

    #[error("no samples accepted (acceptance rate {acceptance_rate})")]
    InsufficientSamples { acceptance_rate: f64 },

    #[error("non-finite estimate: {0}")]
    NonFinite(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
