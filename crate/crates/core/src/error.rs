use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid document '{id}': {}", join(.violations))]
    InvalidDocument {
        id: String,
        violations: Vec<Violation>,
    },

    #[error("invalid annotation: {}", join(.0))]
    InvalidAnnotation(Vec<Violation>),

    #[error("duplicate document id '{0}'")]
    DuplicateDocument(String),

    #[error("unknown paper '{0}'")]
    UnknownPaper(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("no ranking for gold papers: {}", .0.join(", "))]
    MissingRankings(Vec<String>),

    #[error("relevant figure '{figure}' is absent from the ordering")]
    RelevantNotRanked { figure: String },

    #[error("gold annotation for '{paper}' has {found} figures, expected {expected}")]
    GoldLength {
        paper: String,
        found: usize,
        expected: usize,
    },

    #[error("scoring paper '{paper}', figure '{figure}': {source}")]
    Scoring {
        paper: String,
        figure: String,
        #[source]
        source: Box<Error>,
    },

    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("agreement undefined: {0}")]
    UndefinedAgreement(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join(items: &[Violation]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
