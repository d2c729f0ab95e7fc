use bcm_harness::HarnessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("no run matches {selector}; available: {available}")]
    EmptySelection { selector: String, available: String },
    #[error("{0} run(s) failed")]
    RunsFailed(usize),
}

impl From<bcm_core::Error> for CliError {
    fn from(e: bcm_core::Error) -> Self {
        CliError::Harness(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
