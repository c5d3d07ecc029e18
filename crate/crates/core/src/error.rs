use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("input too short: need at least {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },

    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("gradient check unreliable: loss function is not deterministic")]
    UnreliableCheck,

    #[error("audio/visual alignment error: {0}")]
    Alignment(String),

    #[error("memory bank state error: {0}")]
    BankState(String),

    #[error("stream protocol error: {0}")]
    Protocol(String),

    #[error("insufficient input: need {needed} samples, got {got}")]
    InsufficientInput { needed: usize, got: usize },

    #[error("invalid target: signal has no energy after mean removal")]
    InvalidTarget,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("zero-energy input: {0}")]
    ZeroEnergy(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("checkpoint does not match model: {}", describe_load(.missing, .unexpected, .mismatched))]
    Load {
        missing: Vec<String>,
        unexpected: Vec<String>,
        mismatched: Vec<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn describe_load(missing: &[String], unexpected: &[String], mismatched: &[String]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        parts.push(format!("missing [{}]", missing.join(", ")));
    }
    if !unexpected.is_empty() {
        parts.push(format!("unexpected [{}]", unexpected.join(", ")));
    }
    if !mismatched.is_empty() {
        parts.push(format!("shape mismatch [{}]", mismatched.join(", ")));
    }
    parts.join("; ")
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
