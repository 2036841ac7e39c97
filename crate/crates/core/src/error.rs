use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal of {len} samples is shorter than one {fft_size}-point frame")]
    EmptySpectrogram { len: usize, fft_size: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for bad usage or
    /// input, 3 for a violated internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidState(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
