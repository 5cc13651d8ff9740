use crate::attack::AttackResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid color: channel value {0} outside [0, 1]")]
    InvalidColor(f64),

    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("region does not fit inside a {width}x{height} image")]
    OutOfBounds { width: usize, height: usize },

    #[error("shape rasterized to an empty pixel set")]
    DegenerateShape,

    #[error("image is {actual_width}x{actual_height}, oracle expects {expected_width}x{expected_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("label {label} out of range for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("oracle transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("oracle rejected request ({status}): {message}")]
    Rejected { status: u16, message: String },

    #[error("no displacement candidate fits inside the image")]
    Infeasible,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("image i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// An oracle failure interrupted a search; `partial` carries the trace
    /// gathered up to that point.
    #[error("attack aborted: {source}")]
    Aborted {
        source: Box<Error>,
        partial: Box<AttackResult>,
    },
}

impl Error {
    /// True for failures that originate at the oracle rather than the caller's
    /// inputs.
    pub fn is_oracle_failure(&self) -> bool {
        match self {
            Error::Transport { .. } | Error::Rejected { .. } | Error::InvalidProbabilities(_) => {
                true
            }
            Error::Aborted { source, .. } => source.is_oracle_failure(),
            _ => false,
        }
    }
}
