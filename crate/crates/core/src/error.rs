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

    #[error("{file}:{line}: invalid field `{field}`: {message}")]
    Record {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate corpus key {0}")]
    DuplicateKey(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("task {task} is missing samples of class {klass}/{variant}")]
    MissingClass {
        task: String,
        klass: String,
        variant: String,
    },

    #[error("language model: {0}")]
    LanguageModel(String),

    #[error("provider `{provider}` failed{}: {message}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Provider {
        provider: String,
        context: Option<String>,
        message: String,
    },

    #[error("cache miss for {kind} request in cached-only mode")]
    CacheMiss { kind: String },

    #[error("unknown feature selection `{0}`")]
    UnknownSelection(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn provider(provider: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Provider {
            provider: provider.into(),
            context: None,
            message: message.into(),
        }
    }

    /// Attach context (document id, sentence index, fold) to a provider error.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::Provider {
                provider,
                context,
                message,
            } => {
                let ctx = ctx.into();
                let context = Some(match context {
                    Some(inner) => format!("{ctx}; {inner}"),
                    None => ctx,
                });
                Error::Provider {
                    provider,
                    context,
                    message,
                }
            }
            other => other,
        }
    }
}
