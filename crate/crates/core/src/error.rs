use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// A constructed value broke one of its invariants. `path` names the
    /// offending field in document notation (e.g. `agents[2].width`).
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("insufficient frames: need at least {needed}, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("unknown rule id `{0}`")]
    UnknownRule(String),

    #[error("rule weights not renormalizable: {0}")]
    Weights(String),

    #[error("rule not active: {0}")]
    RuleNotActive(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("applicability policy `{policy}` requires {what}")]
    MissingApplicability { policy: &'static str, what: String },

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("injection not possible: {0}")]
    Injection(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
