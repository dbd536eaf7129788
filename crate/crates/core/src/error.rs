//! Error types shared across the pipeline.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure reported by a caption or LLM backend.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Response(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("manifest error at {field}: {reason}")]
    Manifest { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid rubric: {0}")]
    InvalidRubric(String),

    #[error("malformed reason response: {0}")]
    MalformedReason(String),

    #[error("malformed score response: {0}")]
    MalformedScore(String),

    #[error("captioning failed for scene {scene_index}: {source}")]
    Caption {
        scene_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scoring failed for scene {scene_index}: {source}")]
    Scoring {
        scene_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("record is missing stage `{0}`")]
    StageMissing(&'static str),

    #[error("stage `{stage}` failed for video `{video}`: {source}")]
    Stage {
        stage: &'static str,
        video: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, video: &str) -> Self {
        Error::Stage {
            stage,
            video: video.to_string(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a remote backend failure.
    pub fn is_backend(&self) -> bool {
        match self {
            Error::Backend(_) => true,
            Error::Caption { source, .. } | Error::Scoring { source, .. } | Error::Stage { source, .. } => {
                source.is_backend()
            }
            _ => false,
        }
    }

    /// True for configuration and manifest problems (bad user input files).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Manifest { .. } | Error::InvalidRubric(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 stage, 4 remote backend.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else if self.is_backend() {
            4
        } else {
            3
        }
    }
}
