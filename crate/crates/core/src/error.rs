use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor legs with incompatible dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violated a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numeric routine failed to converge or produced garbage.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A requested computation exceeds a hard size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A quantity is mathematically undefined for the given input.
    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config/argument, 3 capacity, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Shape(_) | Error::Undefined(_) => 2,
            Error::Capacity(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 4,
        }
    }
}
