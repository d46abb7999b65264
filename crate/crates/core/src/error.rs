use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    EnumerationCap,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("alphabet of size {0} cannot be byte-encoded (max 256)")]
    UnsupportedAlphabet(usize),

    #[error(
        "enumeration of {candidates} candidate suffixes exceeds the cap of {cap}; \
         use a larger split factor or a shorter horizon"
    )]
    EnumerationTooLarge { candidates: u128, cap: usize },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("infeasible backtest origin {origin}: {reason}")]
    InfeasibleOrigin { origin: usize, reason: String },

    #[error("coverage mismatch, uncovered cells: {0}")]
    Coverage(String),

    #[error("{path}: line {line}: {reason}")]
    Csv {
        path: String,
        line: u64,
        reason: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: String },

    #[error("{path}: timestamps not strictly increasing at line {line}")]
    NonMonotone { path: String, line: u64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::EnumerationTooLarge { .. } => ErrorKind::EnumerationCap,
            Error::Invariant(_) | Error::Decode(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
