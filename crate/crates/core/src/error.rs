use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical overflow at step {step}")]
    NumericalOverflow { step: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no point with f(x) > 0 to evaluate")]
    EmptyReport,

    #[error("step {index} violates a coefficient sign condition: {condition}")]
    InfeasibleSchedule { index: usize, condition: String },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("internal consistency fault: {0}")]
    InternalConsistency(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
