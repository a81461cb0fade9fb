//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by constellation construction, mapping, framing, the PHY
/// chain and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid QAM order {0}: must be a power of 4 between 4 and 4096")]
    InvalidOrder(u64),

    #[error("invalid bit width: {0}")]
    InvalidWidth(String),

    #[error("allocation plan targets {plan}-QAM but the constellation is {constellation}-QAM")]
    OrderMismatch { plan: u32, constellation: u32 },

    #[error("codeword {codeword:#b} is allocated more than once")]
    Overlap { codeword: u32 },

    #[error("incomplete lookup table: {0}")]
    IncompleteTable(String),

    #[error("allocation needs {needed} codewords but only {available} exist")]
    Overflow { needed: u64, available: u64 },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("invalid address-bit layout: {0}")]
    InvalidLayout(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("user {user} needs {needed} data words but its stream holds {available}")]
    InsufficientData {
        user: u32,
        needed: usize,
        available: usize,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("SNR specification error: {0}")]
    Snr(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
