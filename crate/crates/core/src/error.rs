use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The projection target set is empty (zero direction with a positive threshold).
    #[error("no feasible point: {0}")]
    NoFeasiblePoint(&'static str),

    /// The SDP (or its structural check) certified that no beamformer meets the constraints.
    #[error("transmit beamforming subproblem is infeasible")]
    Infeasible,

    /// Rank reduction could not reach rank one and the eigenvector fallback failed.
    #[error("rank-one reduction stalled at rank {rank}")]
    ReductionStalled { rank: usize },

    #[error("SDP solver did not converge: {0}")]
    SolverFailed(String),

    /// No beamformer is feasible even with every element reflecting.
    #[error("instance is infeasible with all elements reflecting")]
    InfeasibleInstance,

    #[error("no grid point of the exhaustive search is feasible")]
    AllInfeasible,

    #[error("exhaustive enumeration needs {solves} SDP solves, limit is {limit}")]
    EnumerationTooLarge { solves: u64, limit: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
