use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate correspondence: {0}")]
    DegenerateCorrespondence(String),
    #[error("point maps to infinity (homogeneous scale {0:e})")]
    PointAtInfinity(f64),
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("clip has no frames")]
    EmptyClip,
    #[error("every state sequence has zero likelihood")]
    AllPathsImpossible,
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("no frames with ground truth to evaluate")]
    NoOverlapFrames,
    #[error("need at least {needed} clips, got {got}")]
    TooFewClips { needed: usize, got: usize },
    #[error("missing input file {0}")]
    MissingInput(String),
    #[error("malformed input {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_) | Error::MissingInput(_) | Error::Parse { .. } | Error::Json(_) | Error::TooFewClips { .. }
        )
    }
}
