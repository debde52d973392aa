use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis operator index {0} is outside 1..=5")]
    BasisIndex(usize),

    #[error("kernel table queried at ({t}, {s}), outside its grid")]
    KernelOutOfRange { t: f64, s: f64 },

    #[error("covariance is not positive semidefinite (most negative eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("integration blew up at t = {t}{}", match .s { Some(s) => alloc::format!(", s = {s}"), None => String::new() })]
    Blowup { t: f64, s: Option<f64> },

    #[error("trajectory on stream {stream} failed: {source}")]
    Trajectory { stream: u64, source: Box<Error> },

    #[error("steady state not reached within t = {horizon} (generator residual {residual:e})")]
    NotConverged { horizon: f64, residual: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("series has {len} points, at least {min} are required")]
    SeriesTooShort { len: usize, min: usize },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("grid mismatch: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn grid(msg: impl Into<String>) -> Self {
        Error::Grid(msg.into())
    }
}
