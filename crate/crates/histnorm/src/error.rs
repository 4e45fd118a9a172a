use std::path::PathBuf;

/// Problems with a model file's bytes.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("model file is truncated")]
    Truncated,
    #[error("model file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("expected a {expected} model, found {found}")]
    WrongKind { expected: String, found: String },
    #[error("malformed model file: {0}")]
    Malformed(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Core(#[from] histnorm_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// Conflicting or invalid options.
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        use histnorm_core::Error as C;
        match self {
            Error::Usage(_) => 1,
            Error::Core(C::NonFiniteGradient(_) | C::ShapeMismatch { .. }) => 3,
            _ => 2,
        }
    }
}
