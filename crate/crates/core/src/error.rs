use thiserror::Error;

/// Errors raised across the crate. Each variant names the failing subsystem
/// so the trainer can report which module aborted a run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("diffmath: shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("diffmath: loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("diffmath: non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("diffmath: distribution is not normalized (group {group} sums to {sum})")]
    NotNormalized { group: usize, sum: f64 },
    #[error("diffmath: optimizer step without gradients for parameter `{0}`")]
    MissingGradients(String),
    #[error("diffmath: backward called on a tape recorded without gradient tracking")]
    NoGrad,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("textembed: text has no tokens")]
    EmptyText,
    #[error("textembed: dimension mismatch ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("goalsource: completion contained no goals")]
    EmptyCompletion,
    #[error("goalsource: remote provider unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("goalsource: empty vocabulary")]
    EmptyVocabulary,
    #[error("goalsource: cache I/O: {0}")]
    Cache(String),
    #[error("env: step after termination")]
    StepAfterTermination,
    #[error("env: unknown action `{0}`")]
    UnknownAction(String),
    #[error("twohot: NaN input")]
    NanInput,
    #[error("agent: length mismatch ({0})")]
    Length(String),
    #[error("trainer: not enough data ({have} steps, need {need})")]
    NotEnoughData { have: usize, need: usize },
    #[error("trainer: config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
