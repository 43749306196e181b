use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("no word occurs at least {min_count} times; vocabulary is empty")]
    EmptyVocabulary { min_count: u64 },

    #[error("co-occurrence statistics are empty")]
    EmptyStats,

    #[error("index {index} out of range for vocabulary of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("no word co-occurs with itself; the self-PMI fill-in rule is undefined")]
    NoSelfPairs,

    #[error("gave up drawing negatives after {attempts} attempts (observed pairs too dense)")]
    NegativeSamplingExhausted { attempts: usize },

    #[error("non-finite loss at epoch {epoch}, entry ({i}, {j})")]
    NonFiniteLoss { epoch: usize, i: u32, j: u32 },

    #[error("zero-norm vector makes the angle undefined (word {0})")]
    ZeroNorm(usize),

    #[error("correlation undefined: a score list has zero rank variance")]
    UndefinedCorrelation,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{what}: only {found} usable item(s), need at least {needed}")]
    InsufficientCoverage {
        what: &'static str,
        found: usize,
        needed: usize,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
