use std::path::PathBuf;

use mbd_core::{FormatError, PlanError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("BAD_MAGIC: expected 0x{expected:08x}, found 0x{found:08x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("DIM_MISMATCH: {0}")]
    DimMismatch(String),
    #[error("TRUNCATED_FILE: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("IO_ERROR: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("CONFIG_INVALID: {0}")]
    ConfigInvalid(String),
    #[error("TASK_UNKNOWN: no task named '{0}'")]
    TaskUnknown(String),
    #[error("IO_ERROR: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("IO_ERROR: {path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("demonstration planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error("seed {seed} failed: {reason}")]
    SeedFailed { seed: u64, reason: String },
    #[error("{failed} of {total} seeds failed")]
    SeedsFailed { failed: usize, total: usize },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for bad input, 3 for I/O, 1 for failed runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid(_) | Self::TaskUnknown(_) => 2,
            Self::Idx(IdxError::Io { .. }) | Self::Io { .. } | Self::Format { .. } => 3,
            Self::Idx(_) => 2,
            Self::Plan(_) | Self::SeedFailed { .. } | Self::SeedsFailed { .. } => 1,
        }
    }
}
