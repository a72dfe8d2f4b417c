use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

use crate::embedding::Scheme;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("trace header: {0}")]
    InvalidHeader(String),

    #[error("bug `{bug_id}`: field `{field}`: {reason}")]
    InvalidRecord {
        bug_id: String,
        field: String,
        reason: String,
    },

    #[error("duplicate bug_id `{0}`")]
    DuplicateBug(String),

    #[error("scheme {scheme} cannot be used for {usage}")]
    SchemeNotAllowed { scheme: Scheme, usage: &'static str },

    #[error("prefix length {requested} outside 0..={max_steps}")]
    PrefixOutOfRange { requested: usize, max_steps: usize },

    #[error("no vocabulary entry for bug `{0}`")]
    UnknownBug(String),

    #[error("bug `{bug_id}` needs argument width {needed}, but the width is fixed at {width}")]
    VocabularyOverflow {
        bug_id: String,
        needed: usize,
        width: usize,
    },

    #[error("feature width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("inference graph of bug `{0}` has no nodes")]
    EmptyGraph(String),

    #[error("backward requested before any forward pass was recorded")]
    NoForwardPass,

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("parameter `{name}`: expected {expected} values, found {found}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("ROC-AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("cannot split {n} items into {k} folds")]
    FoldCount { n: usize, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bug `{bug_id}`: {source}")]
    InBug { bug_id: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn record(bug_id: &str, field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidRecord {
            bug_id: bug_id.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Attaches bug context unless the error already names a bug.
    pub fn in_bug(self, bug_id: &str) -> Self {
        match self {
            e @ (Error::InvalidRecord { .. }
            | Error::InBug { .. }
            | Error::EmptyGraph(_)
            | Error::UnknownBug(_)
            | Error::VocabularyOverflow { .. }) => e,
            other => Error::InBug {
                bug_id: bug_id.into(),
                source: Box::new(other),
            },
        }
    }

    /// The bug this error is about, if any.
    pub fn bug_id(&self) -> Option<&str> {
        match self {
            Error::InvalidRecord { bug_id, .. }
            | Error::InBug { bug_id, .. }
            | Error::VocabularyOverflow { bug_id, .. } => Some(bug_id),
            Error::DuplicateBug(id) | Error::EmptyGraph(id) | Error::UnknownBug(id) => Some(id),
            _ => None,
        }
    }
}
