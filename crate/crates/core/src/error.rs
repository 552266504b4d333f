use thiserror::Error;

/// Errors raised by the engine. Configuration problems carry the offending
/// key so the CLI can report it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid action sequence: {0}")]
    InvalidSequence(String),

    #[error("enumeration of {count} sequences exceeds the limit of {limit}")]
    EnumerationTooLarge { count: String, limit: u64 },

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("buffer holds {0} item(s); evolutionary update needs more than one")]
    BufferTooSmall(usize),

    #[error("minibatch is empty")]
    EmptyMinibatch,

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("{0}")]
    Precondition(String),

    #[error("{}", parse_message(.file, .line, .reason))]
    Parse {
        file: String,
        line: Option<u64>,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

fn parse_message(file: &str, line: &Option<u64>, reason: &str) -> String {
    match line {
        Some(l) => format!("{file}:{l}: {reason}"),
        None => format!("{file}: {reason}"),
    }
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    pub fn parse(file: impl Into<String>, line: Option<u64>, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            reason: err.to_string(),
        }
    }

    /// Whether the error stems from user input (config, data files, guards)
    /// rather than from the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. }
                | Error::Parse { .. }
                | Error::EnumerationTooLarge { .. }
                | Error::Precondition(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
