use thiserror::Error;

/// Library-wide error type.
///
/// Variants fall into two broad classes, exposed via [`Error::class`], which
/// front ends map onto process exit codes: problems with user-supplied input
/// (grids, detectors, config files) versus numerical invariants that failed
/// while a run was in flight.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time axis: {0}")]
    InvalidTimeAxis(String),

    #[error("invalid detector: {0}")]
    InvalidDetector(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("state not normalized: |norm - 1| = {drift:.3e}")]
    NotNormalized { drift: f64 },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e} at step {step}")]
    NormDrift { step: usize, drift: f64, limit: f64 },

    #[error("detection probability {value} exceeds 1 beyond tolerance {tolerance:.1e}")]
    ProbabilityOverflow { value: f64, tolerance: f64 },

    #[error("zero detection probability: conditional distribution undefined")]
    ZeroDetection,

    #[error("variance {value:.3e} negative beyond tolerance: quadrature inconsistency")]
    NegativeVariance { value: f64 },

    #[error("velocity singular at t = {time:.6}, x = {x:.6}: density {rho:.3e} at or below floor")]
    SingularVelocity { time: f64, x: f64, rho: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse failure classification for exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: construction parameters, config files, unreadable files.
    Config,
    /// A numerical invariant was violated during a run.
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidGrid(_) | InvalidTimeAxis(_) | InvalidDetector(_) | InvalidPotential(_)
            | InvalidField(_) | InvalidConfig(_) | SeriesMismatch(_) | Io(_) | Parse(_) => {
                ErrorClass::Config
            }
            NotNormalized { .. }
            | NormDrift { .. }
            | ProbabilityOverflow { .. }
            | ZeroDetection
            | NegativeVariance { .. }
            | SingularVelocity { .. } => ErrorClass::Invariant,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
