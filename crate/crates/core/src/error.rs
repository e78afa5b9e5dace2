use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: expected header title,text,subject,date, found {found}")]
    HeaderMismatch { path: PathBuf, found: String },

    #[error("{path}: no parsable rows")]
    EmptyFile { path: PathBuf },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("corpus must contain both fake and real articles (fake={fake}, real={real})")]
    SingleClass { fake: usize, real: usize },

    #[error("too few usable months: need {needed}, found {found}\n{census}")]
    TooFewMonths {
        needed: usize,
        found: usize,
        census: String,
    },

    #[error("empty vocabulary after min_count={min_count} filtering")]
    EmptyVocabulary { min_count: u64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("dbscan found no clusters (all {n} points are noise at eps={eps}, min_pts={min_pts}); increase eps")]
    NoClusters { n: usize, eps: f64, min_pts: usize },

    #[error("test article ids reached a fit stage: {0:?}")]
    Leakage(Vec<u64>),

    #[error("model format: {0}")]
    Format(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
