use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a domain-type invariant at construction.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("MTU of {mtu} bytes does not exceed the {overhead}-byte header overhead")]
    MtuTooSmall { mtu: u32, overhead: u32 },

    /// Text could not be parsed; `token` is the offending piece of input.
    #[error("cannot parse {input:?}: {reason} (at {token:?})")]
    Parse {
        input: String,
        token: String,
        reason: String,
    },

    #[error("missing tunable file {0}")]
    MissingTunable(String),

    #[error("malformed content {content:?} in {path}: {source}")]
    MalformedTunable {
        path: String,
        content: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("cannot resolve {host}: {reason}")]
    Resolve { host: String, reason: String },

    #[error("{target} unreachable: all {failures} attempts failed")]
    Unreachable { target: String, failures: usize },

    #[error("no samples to summarize")]
    EmptySamples,
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn io_path(path: &Path, source: io::Error) -> Self {
        Error::io(path.display().to_string(), source)
    }
}
