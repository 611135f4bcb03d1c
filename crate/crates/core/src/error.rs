use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}:{line}: {msg}")]
    FileParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty lexicon: no word of the word list has a usable dictionary entry")]
    EmptyLexicon,

    #[error("unknown phoneme `{0}`")]
    UnknownPhoneme(String),

    #[error("phoneme `{symbol}` is a {kind}, expected a consonant")]
    NotConsonant { symbol: &'static str, kind: &'static str },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence too short: need at least {needed} frames, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("speaker `{speaker}` has no {what}; known speakers: {known}")]
    MissingSpeaker {
        speaker: String,
        what: &'static str,
        known: String,
    },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("weight file format error: {0}")]
    Format(String),

    #[error("weight file version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate scale: mean inter-phoneme distance is zero")]
    DegenerateScale,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
