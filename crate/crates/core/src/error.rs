use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("observation granularity mismatch: expected {expected}, got {actual}")]
    GranularityMismatch { expected: String, actual: String },

    #[error(
        "innovation matrix is not positive definite (pivot {pivot:.3e} at row {row}, \
         largest diagonal {max_diagonal:.3e}); ensemble is degenerate or observation noise too small"
    )]
    SingularInnovation {
        row: usize,
        pivot: f64,
        max_diagonal: f64,
    },

    #[error("all {restarts} optimization restarts produced a non-finite loss")]
    AllRestartsDiverged { restarts: usize },

    #[error("baseline error is zero; normalization undefined")]
    ZeroBaseline,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
