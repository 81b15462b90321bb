//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A file is not in the expected container format (bad RIFF structure,
    /// truncated chunks, wrong magic).
    #[error("format error: {0}")]
    Format(String),

    /// The container is recognized but the payload encoding is unsupported
    /// (e.g. compressed or float WAV).
    #[error("decode error: {0}")]
    Decode(String),

    /// Invalid configuration or parameters.
    #[error("config error: {0}")]
    Config(String),

    /// Vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// An index or interval falls outside the data it addresses.
    #[error("range error: {0}")]
    Range(String),

    /// An incremental update would violate a structural invariant
    /// (e.g. decrementing an empty histogram bin).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Codebook training cannot proceed on the given data.
    #[error("training error: {0}")]
    Training(String),

    /// Input is empty or too short to process.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Compressed features from different segments were mixed.
    #[error("segment mismatch: {0}")]
    SegmentMismatch(String),

    /// Exact optimization was requested on an instance above the guard size.
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    /// A computation would exceed the configured memory budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Persisted data does not start with the expected magic bytes.
    #[error("bad magic: {0}")]
    BadMagic(String),

    /// Persisted data carries an unsupported format version.
    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    /// Persisted data fails its integrity checksum.
    #[error("checksum failure: {0}")]
    ChecksumMismatch(String),

    /// A loaded or constructed artifact violates one of its invariants.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
