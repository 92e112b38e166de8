use thiserror::Error;

/// Error type shared across the crate.
///
/// The variants map onto the CLI's exit-code contract: `Data` is a problem
/// with user-supplied data (exit code 2), everything else is a usage or
/// internal failure (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad dimensions, bad hyperparameters, unknown keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument to an operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Operation called on an object in the wrong state (e.g. unfitted scaler).
    #[error("invalid state: {0}")]
    State(String),

    /// Problem with input data: malformed rows, missing columns, missing labels.
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure during training (non-finite gradients or values).
    #[error("training error: {0}")]
    Training(String),

    /// Serialization / deserialization failure.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that should map to the data-error exit code.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Data(_))
    }
}
