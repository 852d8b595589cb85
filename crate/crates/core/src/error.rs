use thiserror::Error;

use crate::model::SegmentId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("infeasible storage: M_U + rho * M_S = {total} < N = {files}")]
    InfeasibleStorage { total: String, files: usize },

    #[error("parameter out of range: {0}")]
    BadRange(String),

    #[error("bad length: {0}")]
    BadLength(String),

    #[error("not enough shares: have {have} distinct, need {need}")]
    NotEnoughShares { have: usize, need: usize },

    #[error("singular decoding system for servers {servers:?}")]
    SingularSystem { servers: Vec<usize> },

    #[error("enumeration too large: {count} topologies exceeds the guard of {limit}")]
    TooLarge { count: f64, limit: f64 },

    #[error("group {group:?} cannot be covered {need} times by the connected servers")]
    Uncoverable { group: Vec<usize>, need: usize },

    #[error("inconsistent type vector: {0}")]
    InconsistentType(String),

    #[error("probabilities sum to {0}, not 1")]
    BadDistribution(String),

    #[error("no u in [0, t] brackets the residual demand: {0}")]
    NoBracket(String),

    #[error("user {user} failed to decode segment {segment}: {reason}")]
    DecodeMismatch {
        user: usize,
        segment: SegmentId,
        reason: String,
    },

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization: {0}")]
    Serde(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
