use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient routine produced NaN or infinity.
    #[error("non-finite {what} at x = {x:?}")]
    NonFinite { what: &'static str, x: Vec<f64> },

    /// The state or a flow matrix became non-finite during time stepping.
    #[error("integration failed at step {step}: {message}")]
    Integration { step: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("horizon t0 = {t0} exceeds t* = gamma0 / r = {t_star}")]
    PolicyViolation { t0: f64, t_star: f64 },

    #[error("numerically singular fundamental matrix at t = {time}")]
    Singular { time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("model has no exact stationary sampler")]
    NoExactSampler,

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the caller's parameters rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::GridMismatch(_)
                | Error::PolicyViolation { .. }
                | Error::Unsupported(_)
                | Error::NoExactSampler
                | Error::EmptyEnsemble
                | Error::Config(_)
        )
    }
}
