use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems found while decoding an embedding file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic bytes {found:?}, expected \"CREM\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {found}, expected 1")]
    UnsupportedVersion { found: u32 },
    #[error("header declares dim = 0")]
    ZeroDim,
    #[error("truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("sidecar lists {sidecar} ids but header declares {header} rows")]
    IdCount { header: u64, sidecar: u64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: line {line}: invalid UTF-8", path.display())]
    Decode { path: PathBuf, line: usize },

    #[error("{}: line {line}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {kind}", path.display())]
    Format { path: PathBuf, kind: FormatError },

    #[error("row {row} is a zero vector")]
    DegenerateVector { row: usize },

    #[error("row {row}, column {col} is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("row {row} has L2 norm {norm}, outside unit tolerance")]
    NotUnitNorm { row: usize, norm: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("language {lang}: only {found} mined pairs link it to the reference, need at least {needed}")]
    InsufficientPairs {
        lang: String,
        found: usize,
        needed: usize,
    },

    #[error("language {lang}: cross-covariance is rank deficient")]
    RankDeficient { lang: String },

    #[error("trainer failed at iteration {iteration} (exit code {code:?}): {diagnostics}")]
    Trainer {
        iteration: usize,
        code: Option<i32>,
        diagnostics: String,
    },

    #[error("trainer protocol violation: {0}")]
    Protocol(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to I/O or runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Trainer { .. } | Error::Protocol(_)
        )
    }
}
