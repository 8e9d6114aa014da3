use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {malformed} of {total} lines are malformed")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("macro-category {0} is declared with conflicting names")]
    DuplicateMacro(u32),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown node index {0}")]
    UnknownNode(usize),
    #[error("source `{source_user}` does not hold interest {interest}")]
    SourceLacksInterest { source_user: String, interest: u32 },
    #[error("user `{0}` has no home-point")]
    MissingHomePoint(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid model catalog: {0}")]
    InvalidCatalog(String),
    #[error("empty relationship kind selection")]
    EmptyKindSelection,
    #[error("giant component of an empty node set")]
    EmptyNodeSet,
    #[error("no eligible sources for interest {0}")]
    NoEligibleSources(u32),
    #[error("config: {0}")]
    Config(String),
    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),
    #[error("invalid synthetic scenario: {0}")]
    InvalidScenario(String),
    #[error("broken relay chain at device {0}")]
    BrokenRelayChain(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
