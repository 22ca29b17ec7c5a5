use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dictionary is under-complete: grid size {grid} < array size {array}")]
    UnderCompleteDictionary { array: usize, grid: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("detection failure: {0}")]
    Detection(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("matrix entries must have unit modulus: {0}")]
    Feasibility(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("common channel is not available for user {0}")]
    MissingCommonChannel(usize),

    #[error("stage {stage}, user {user}, frame {frame}: {source}")]
    Stage {
        stage: u8,
        user: usize,
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Wraps an estimation error with the stage/user/frame it came from.
    pub fn at(self, stage: u8, user: usize, frame: usize) -> Error {
        Error::Stage {
            stage,
            user,
            frame,
            source: Box::new(self),
        }
    }
}
