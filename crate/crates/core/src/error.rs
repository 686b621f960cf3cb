use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not an embedding file: bad magic {found:?}, expected \"RFE1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u32),

    #[error("{what} mismatch: expected {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("row {row} ({id}) is a zero vector; cosine similarity is undefined")]
    ZeroVector { row: usize, id: String },

    #[error("row {row} ({id}) contains a non-finite component")]
    NonFinite { row: usize, id: String },

    #[error("duplicate item id {0:?}")]
    DuplicateId(String),

    #[error("manifest line {line}: field `{field}`: {reason}")]
    MissingField {
        line: usize,
        field: &'static str,
        reason: String,
    },

    #[error("manifest line {line}: {source}")]
    ManifestSyntax {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("feature store and manifest disagree: {0}")]
    IdMismatch(String),

    #[error("unknown item {0:?}")]
    UnknownItem(String),

    #[error("feature store is empty")]
    EmptyStore,

    #[error("feedback set is empty")]
    EmptyFeedback,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no items left after filtering")]
    EmptyAfterFilter,

    #[error("stratum {key:?} has {size} items, at least {min} are needed for a 1:2:2 split")]
    StratumTooSmall { key: String, size: usize, min: usize },

    #[error("cannot place {classes} unit-sphere class means in {dim} dimensions with separation {separation}")]
    SeparationInfeasible {
        classes: usize,
        dim: usize,
        separation: f64,
    },

    #[error("MAP@R is undefined when there are no positives (R = 0)")]
    UndefinedForZeroR,

    #[error("correlation is undefined: {0} has zero variance")]
    DegenerateVariance(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
