use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("non-finite input component")]
    NonFinite,

    #[error("coefficients sum to {sum}, too far from 1 to renormalize")]
    NotNormalized { sum: f64 },

    #[error("circuit self-check failed: {0}")]
    SelfCheck(String),

    #[error("post-selection probability {0} is degenerate")]
    DegeneratePostSelection(f64),

    #[error("parity proportion {0} below the estimation regime (p >= 0.5)")]
    LowParity(f64),

    #[error("no feasible root found for the reconstruction system (best residual {0:.3e})")]
    InfeasibleProportions(f64),

    #[error("gradient singular at the boundary f_i = 0.5")]
    BoundarySingularity,

    #[error("no sign change in threshold bracket [{0}, {1}]")]
    NoSignChange(f64, f64),

    #[error("target fidelity {target} unreachable within {max_rounds} rounds")]
    ThresholdUnreachable { target: f64, max_rounds: usize },

    #[error("trajectory degenerated after round {completed_rounds}")]
    TrajectoryDegenerate { completed_rounds: usize },

    #[error("config parse error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
