use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: duplicate dictionary entry {entry}")]
    DuplicateEntry { path: PathBuf, line: usize, entry: String },
    #[error("{path}:{line}: {kind} id {id} out of range (count {count})")]
    IdOutOfRange { path: PathBuf, line: usize, kind: &'static str, id: u64, count: usize },
    #[error("{path}:{line}: duplicate triple {triple}")]
    DuplicateTriple { path: PathBuf, line: usize, triple: String },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported {format} version {found}")]
    UnsupportedVersion { format: &'static str, found: u32 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),
    #[error("duplicate entity record {0}")]
    DuplicateRecord(u32),
    #[error("entity id {id} out of range (count {count})")]
    RecordOutOfRange { id: u32, count: usize },
    #[error("header dimension is zero")]
    ZeroDimension,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] mmkge_core::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Stable short identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        use mmkge_core::Error as C;
        match self {
            Error::Io { .. } => "io",
            Error::MissingFile(_) => "missing-file",
            Error::Malformed { .. } => "malformed-line",
            Error::DuplicateEntry { .. } => "duplicate-entry",
            Error::IdOutOfRange { .. } | Error::RecordOutOfRange { .. } => "id-out-of-range",
            Error::DuplicateTriple { .. } => "duplicate-triple",
            Error::BadMagic { .. } => "bad-magic",
            Error::UnsupportedVersion { .. } => "unsupported-version",
            Error::Truncated { .. } => "truncated-payload",
            Error::TrailingBytes(_) => "trailing-bytes",
            Error::DuplicateRecord(_) => "duplicate-record",
            Error::ZeroDimension => "zero-dimension",
            Error::Config(_) => "invalid-config",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Core(c) => match c {
                C::EntityOutOfRange { .. } | C::RelationOutOfRange { .. } => "id-out-of-range",
                C::DuplicateTriple { .. } => "duplicate-triple",
                C::DimensionMismatch { .. } | C::ZeroDimension(_) => "dimension-mismatch",
                C::DuplicateFeature(_) => "duplicate-record",
                C::NonFiniteFeature(_) => "non-finite-feature",
                C::InvalidBatchCount { .. } => "invalid-batch-count",
                C::NotEnoughEntities(_) => "not-enough-entities",
                C::EmptyMask | C::UnknownComponent(_) | C::InvalidConfig(_) => "invalid-config",
                C::NegativeCountMismatch { .. } => "negative-count-mismatch",
                C::NonFiniteLoss { .. } => "non-finite-loss",
                C::EmptyTestSplit => "empty-test-split",
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
