use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or invalid input configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot normalize a wave field with zero norm")]
    ZeroNorm,

    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    #[error("position {position:?} lies outside the tabulated domain")]
    Domain { position: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A declared contract (force bound, mass floor) was observed to be false.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("picard iteration diverged on segment {segment}: observed ratio {observed:.4} vs declared alpha {declared:.4} after {iterations} iterations")]
    Divergence {
        segment: usize,
        iterations: usize,
        observed: f64,
        declared: f64,
    },

    #[error("partition with {requested} intervals is not resolvable from {available} samples")]
    Resolution { requested: usize, available: usize },

    #[error("scenario validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::ZeroNorm => "normalization",
            Error::Numerical { .. } => "numerical",
            Error::Domain { .. } => "domain",
            Error::Precondition(_) => "precondition",
            Error::Contract(_) => "contract",
            Error::Divergence { .. } => "divergence",
            Error::Resolution { .. } => "resolution",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
