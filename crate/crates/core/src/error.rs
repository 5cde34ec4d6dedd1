use std::path::PathBuf;

/// Errors surfaced by the toolkit.
///
/// Variants are grouped by the exit-status class the command-line front end
/// reports for them (see [`Error::exit_code`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("placement error: {0}")]
    Placement(String),

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Stable process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format(_) => 3,
            Error::Placement(_) | Error::Annotation(_) => 4,
            Error::Evaluation(_) => 5,
            Error::Internal(_) => 1,
        }
    }

    /// Prefix a placement/annotation error with the scene it came from.
    pub fn in_scene(self, index: u64) -> Self {
        match self {
            Error::Placement(m) => Error::Placement(format!("scene {index}: {m}")),
            Error::Annotation(m) => Error::Annotation(format!("scene {index}: {m}")),
            other => other,
        }
    }
}
