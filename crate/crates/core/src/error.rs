use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: span [{start}, {end}) of instance {id:?} does not match target {target:?} (found {found:?})")]
    SpanMismatch {
        line: usize,
        id: String,
        start: usize,
        end: usize,
        target: String,
        found: String,
    },

    #[error("sidecar block for sentence {sentence:?} has {found} tokens, tokenizer produced {expected}")]
    SidecarTokenCount {
        sentence: String,
        expected: usize,
        found: usize,
    },

    #[error("sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("mandatory resource {0:?} missing from manifest")]
    MissingResource(String),

    #[error("feature family {family} requires resource {resource:?}, which is not loaded")]
    MissingFamilyResource { family: String, resource: String },

    #[error("language mismatch: instance is {instance}, resources are {bundle}")]
    LanguageMismatch { instance: String, bundle: String },

    #[error("unknown feature family {0:?}")]
    UnknownFeature(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("label vectors differ in length ({gold} gold vs {pred} predicted)")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("cannot evaluate an empty dataset")]
    EmptyDataset,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
