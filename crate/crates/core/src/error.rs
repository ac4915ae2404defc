use thiserror::Error;

/// Crate-wide error type.
///
/// Variants split into two broad groups that front ends map onto exit
/// codes: input problems (bad parameters, malformed files, impossible
/// partitions) and execution problems (divergence, solver failure, I/O).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph generation failed: no connected graph with n={n}, radius={radius} after {attempts} attempts")]
    GraphGeneration { n: usize, radius: f64, attempts: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mixing matrix invariant violated: {0}")]
    InvalidMixingMatrix(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("reference solver failed: {0}")]
    SolverFailure(String),

    #[error("iterate norm exceeded {limit:.0e} at round {round}")]
    Diverged { round: u64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than execution failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidMixingMatrix(_)
                | Error::Parse { .. }
                | Error::Partition(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
