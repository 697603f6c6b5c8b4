use thiserror::Error;

/// Errors produced by simulation, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-uniform sampling schedule; use the trapezoidal continuous transform instead")]
    NonUniformSampling,

    #[error("no real spectral peak for omega0 = {omega0}, gamma = {gamma}")]
    NoRealPeak { omega0: f64, gamma: f64 },

    #[error("degenerate spectral peak: {0}")]
    DegeneratePeak(String),

    #[error("degenerate basis: Gram matrix eigenvalue ratio {ratio:e} below threshold")]
    DegenerateBasis { ratio: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("angle recovery failed: arccos argument {0} outside tolerance")]
    AngleRecovery(f64),

    #[error("traces do not share an identical sampling schedule")]
    MismatchedSchedules,

    #[error("degenerate likelihood: {0}")]
    DegenerateLikelihood(String),

    #[error("Fisher information matrix is singular")]
    SingularFisher,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used for the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::NonUniformSampling => "non_uniform_sampling",
            Error::NoRealPeak { .. } => "no_real_peak",
            Error::DegeneratePeak(_) => "degenerate_peak",
            Error::DegenerateBasis { .. } => "degenerate_basis",
            Error::EstimationFailed(_) => "estimation_failed",
            Error::AngleRecovery(_) => "angle_recovery",
            Error::MismatchedSchedules => "mismatched_schedules",
            Error::DegenerateLikelihood(_) => "degenerate_likelihood",
            Error::SingularFisher => "singular_fisher",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
