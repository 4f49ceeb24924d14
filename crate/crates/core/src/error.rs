use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The agent graph violates a structural requirement.
    #[error("invalid agent graph: {0}")]
    Graph(String),

    #[error("invalid `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("row {row} of a transition kernel sums to {sum} instead of 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("agent {agent} is not one of the members {members:?}")]
    NotAMember { agent: usize, members: Vec<usize> },

    #[error("state {0} is not an interior state")]
    NotInterior(usize),

    #[error("fixed-point iteration did not converge after {iterations} iterations (change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    /// Every candidate weight vanished, so no normalised distribution exists.
    #[error("numerical underflow: {0}")]
    Underflow(String),

    #[error("controlled distribution puts mass on successor {0} outside the passive support")]
    NotAbsolutelyContinuous(usize),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("unknown {kind} `{key}`")]
    Unknown { kind: &'static str, key: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
