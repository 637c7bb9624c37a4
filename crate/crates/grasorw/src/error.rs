use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("invalid store: {0}")]
    InvalidStore(String),

    #[error("block {0} out of range ({1} blocks)")]
    BlockOutOfRange(u32, u32),

    #[error("vertex {0} out of range ({1} vertices)")]
    VertexOutOfRange(u64, u64),

    #[error("graph needs {0} blocks; the walk encoding supports at most 1024")]
    TooManyBlocks(u64),

    #[error("vertex id {0} exceeds the 42-bit walk-state limit")]
    VertexIdTooLarge(u64),

    #[error("vertex {0} has no block assignment")]
    MissingAssignment(u64),

    #[error("corrupt walk pool {path}: {size} bytes is not a multiple of 16")]
    CorruptPool { path: PathBuf, size: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    WalkEncode(#[from] grasorw_core::walk::FieldOutOfRange),

    #[error(transparent)]
    Route(#[from] grasorw_core::route::RouteError),

    #[error(transparent)]
    Param(#[from] grasorw_core::transition::InvalidParam),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
