use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("unsupported polynomial degree {0} (expected 0, 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("negative cell average {average:e} in cell ({i}, {j}); positivity limiter precondition violated")]
    NegativeAverage { i: usize, j: usize, average: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("distorted upstream cell for target cell ({i}, {j}): {reason}; use a smaller time step")]
    DistortedCell { i: usize, j: usize, reason: String },

    #[error("inconsistent clipping topology for target cell ({i}, {j}): {reason}; use a smaller time step")]
    Topology { i: usize, j: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("output failed: {0}")]
    Output(String),

    #[error("not enough peaks: found {found}, need at least {needed}")]
    InsufficientPeaks { found: usize, needed: usize },
}

impl Error {
    /// Whether the error signals a geometric breakdown that a smaller time
    /// step would avoid.
    pub fn is_breakdown(&self) -> bool {
        matches!(
            self,
            Error::DistortedCell { .. } | Error::Topology { .. } | Error::NegativeAverage { .. }
        )
    }
}
