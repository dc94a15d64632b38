use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by sketch construction, stream ingestion and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A counter would exceed its 64-bit range. The failed update is not
    /// applied and the sketch refuses further updates.
    #[error("counter overflow: {0}")]
    CounterOverflow(String),

    /// The sketch rejected an operation because a previous update overflowed.
    #[error("sketch is poisoned by an earlier counter overflow")]
    Poisoned,

    /// The unique-bucket table has no room for another key.
    #[error("heavy-hitter table full: capacity {capacity}")]
    CapacityExceeded { capacity: usize },

    /// A key was admitted twice to the unique-bucket table.
    #[error("key already admitted to heavy-hitter table")]
    DuplicateKey,

    /// Weight was routed to a key that has no unique bucket. This indicates
    /// a routing bug in the caller, not a data problem.
    #[error("key not admitted to heavy-hitter table")]
    KeyNotAdmitted,

    /// The stream fragment used to pick heavy hitters was empty.
    #[error("empty stream prefix: no basis for heavy-hitter selection")]
    EmptyPrefix,

    /// A tuning grid contained no candidates.
    #[error("empty tuning grid")]
    EmptyGrid,

    /// A (budget, depth, unique-bucket) combination does not admit a sketch
    /// with at least one bucket per row.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// A windowed schedule was asked to run with fewer history windows than
    /// it needs.
    #[error("insufficient history: need {needed} windows before the first test window, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    /// The error metric was asked to score an empty truth map.
    #[error("empty truth map: nothing to score")]
    EmptyTruth,

    /// A truth key had no corresponding estimate.
    #[error("missing estimate for a truth key")]
    MissingEstimate,

    /// A serialized blob failed validation.
    #[error("corrupt blob: {0}")]
    Corrupt(String),

    /// More than 1% of log rows were malformed.
    #[error("too many malformed rows: {malformed} of {rows}")]
    TooManyMalformed { malformed: u64, rows: u64 },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
