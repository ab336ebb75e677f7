use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate location ({x1}, {x2}){}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    DuplicateLocation { x1: f64, x2: f64, line: Option<usize> },

    #[error("too few points: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("local linear fit at ({x1}, {x2}) is singular: only {support} points in the kernel support")]
    SingularLocalFit { x1: f64, x2: f64, support: usize },

    #[error("degenerate cross-validation denominator ({0:e})")]
    DegenerateDenominator(f64),

    #[error("objective is not finite at the initial point")]
    NonFiniteObjective,

    #[error("degenerate semivariance cloud: {0}")]
    DegenerateCloud(String),

    #[error("pilot variogram has no positive support")]
    EmptyPilot,

    #[error("variogram model has zero sill")]
    ZeroSill,

    #[error("matrix is not positive semidefinite (even after jitter {jitter:e})")]
    NotPsd { jitter: f64 },

    #[error("singular kriging system")]
    SingularSystem,

    #[error("residuals have zero spread; cannot standardize")]
    DegenerateResiduals,

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numerical,
    Config,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_)
            | Error::DuplicateLocation { .. }
            | Error::TooFewPoints { .. }
            | Error::Parse { .. }
            | Error::Io(_) => ErrorCategory::Input,
            Error::Unknown { .. } | Error::Config(_) => ErrorCategory::Config,
            _ => ErrorCategory::Numerical,
        }
    }

    /// Short machine-readable tag, printed by the CLI on failure.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DuplicateLocation { .. } => "duplicate_location",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::Parse { .. } => "parse_error",
            Error::SingularLocalFit { .. } => "singular_local_fit",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::NonFiniteObjective => "non_finite_objective",
            Error::DegenerateCloud(_) => "degenerate_cloud",
            Error::EmptyPilot => "empty_pilot",
            Error::ZeroSill => "zero_sill",
            Error::NotPsd { .. } => "not_psd",
            Error::SingularSystem => "singular_system",
            Error::DegenerateResiduals => "degenerate_residuals",
            Error::Unknown { .. } => "unknown_name",
            Error::Config(_) => "config_error",
            Error::Io(_) => "io_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
