use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("triplet ({row}, {col}) is outside a {nrows}x{ncols} matrix")]
    Assembly {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("index {index} is outside the global range 0..{nglobal}")]
    IndexOutOfRange { index: usize, nglobal: usize },

    #[error("rank {rank} does not own global row {row}")]
    UnownedRow { rank: usize, row: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("structural drift since the symbolic phase: {0}")]
    StructuralDrift(String),

    #[error(transparent)]
    Comm(#[from] CommError),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("oracle refused: {0}")]
    OracleCap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failures of the multi-rank harness itself.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommError {
    #[error("deadlock: {}", describe_blocked(.blocked))]
    Deadlock { blocked: Vec<BlockedRank> },

    #[error("rank {rank} expected a {expected} message from rank {from}, got {got}")]
    UnexpectedMessage {
        rank: usize,
        from: usize,
        expected: String,
        got: String,
    },

    #[error("rank {rank} addressed nonexistent rank {peer}")]
    BadPeer { rank: usize, peer: usize },

    #[error("malformed message payload: {0}")]
    Malformed(String),

    #[error("rank {0} panicked")]
    RankPanicked(usize),

    #[error("harness needs at least one rank")]
    NoRanks,
}

/// One entry of a deadlock diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedRank {
    pub rank: usize,
    /// `Some(peer)` when blocked on a receive, `None` inside a collective.
    pub awaiting: Option<usize>,
}

fn describe_blocked(blocked: &[BlockedRank]) -> String {
    blocked
        .iter()
        .map(|b| match b.awaiting {
            Some(peer) => format!("rank {} waits on rank {}", b.rank, peer),
            None => format!("rank {} waits in a collective", b.rank),
        })
        .collect::<Vec<_>>()
        .join("; ")
}
