use thiserror::Error;

/// Errors produced by the numeric core, the expression language and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("`{function}` expects {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
        offset: usize,
    },

    #[error("domain error in `{node}`: {message}")]
    Domain { node: String, message: String },

    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the 1-based index of the task that raised it.
    pub fn for_task(self, task: usize) -> Self {
        Error::Task {
            task,
            source: Box::new(self),
        }
    }

    /// True for errors that arise from evaluating a loss (domain errors),
    /// possibly wrapped with a task index.
    pub fn is_domain(&self) -> bool {
        match self {
            Error::Domain { .. } => true,
            Error::Task { source, .. } => source.is_domain(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
