use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point outside the effective domain: {0}")]
    Domain(String),
    #[error("index {index} is not a nonnegative coordinate (m = {m})")]
    Index { index: usize, m: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("step failure: {0}")]
    StepFailure(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
