use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NonHermitianInput { asymmetry: f64 },

    #[error("matrix has eigenvalue {eigenvalue:.3e} below the clamping threshold")]
    NegativeSpectrum { eigenvalue: f64 },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("scattering denominator vanishes (|den| = {magnitude:.3e})")]
    DegenerateDenominator { magnitude: f64 },

    #[error("contrast undefined: total output excitation is zero")]
    ZeroFlux,

    #[error("physicality violated at t = {time}: {what}")]
    PhysicalityViolation { time: f64, what: String },

    #[error("step size underflow at t = {time} (h = {step:.3e})")]
    NonConvergence { time: f64, step: f64 },

    #[error("negative output flux {value:.3e} at t = {time}")]
    NegativeFlux { time: f64, value: f64 },

    #[error("only {found} samples carry coherence above threshold; need at least {needed}")]
    InsufficientSupport { found: usize, needed: usize },

    #[error("heralding branch {outcome} has probability {probability:.3e}")]
    ZeroProbabilityBranch { outcome: &'static str, probability: f64 },

    #[error("csv output failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
