use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector{}: cosine similarity is undefined", .0.as_deref().map(|id| format!(" ({id})")).unwrap_or_default())]
    ZeroVector(Option<String>),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("unequal set sizes: {left} vs {right}")]
    UnequalSizes { left: usize, right: usize },

    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind}: {key}")]
    Duplicate { kind: &'static str, key: String },

    #[error("unknown concept `{name}`{}; available: {}", suggestion_suffix(.suggestions), .available.join(", "))]
    UnknownConcept {
        name: String,
        suggestions: Vec<String>,
        available: Vec<String>,
    },

    #[error("test `{test}`: {source}")]
    Test {
        test: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the name of the battery test that produced it.
    pub fn in_test(self, test: impl Into<String>) -> Self {
        Error::Test {
            test: test.into(),
            source: Box::new(self),
        }
    }

    /// True when the error originates from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => source.is_io_error(),
            Error::Test { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
