//! Crate-wide error type.

use thiserror::Error;

/// Anything that can go wrong across the simulation, training, and I/O paths.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency table: {0}")]
    InvalidTable(String),

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A governor handed back a frequency the hardware table does not offer.
    #[error("governor returned {got_ghz} GHz, which is not a table frequency")]
    GovernorProtocol { got_ghz: f64 },

    /// An observation refers to a frequency outside the configured table.
    #[error("observed frequency {got_ghz} GHz is not a table frequency")]
    UnknownFrequency { got_ghz: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Parameter outside the representable fixed-point envelope.
    #[error("parameter {name} = {value} is outside the quantizable range [{lo}, {hi}]")]
    QuantRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("training diverged: non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads version {expected})")]
    BadVersion { expected: u16, found: u16 },

    #[error("file truncated at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("model does not match the active configuration: {0}")]
    ModelMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
