use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("CSV parse error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("input file not found: {}", .0.display())]
    InputNotFound(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vocabulary empty after filtering")]
    EmptyVocabulary,

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("no test documents")]
    NoTestDocuments,

    #[error("zero probability for word `{word}` in held-out document {doc_id}")]
    ZeroProbability { doc_id: usize, word: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("{model} fit failed for K={k}: {source}")]
    ModelFit {
        model: String,
        k: usize,
        #[source]
        source: Box<Error>,
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

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for input/configuration problems, 3 when nothing is left to model,
    /// 4 when a model fit or evaluation fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingColumn(_)
            | Error::Csv { .. }
            | Error::InputNotFound(_)
            | Error::Io { .. }
            | Error::Config(_)
            | Error::Format { .. } => 2,
            Error::EmptyVocabulary | Error::EmptyCorpus(_) | Error::NoTestDocuments => 3,
            Error::ModelFit { .. } | Error::ZeroProbability { .. } | Error::InvalidArgument(_) => 4,
        }
    }
}
