use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input; `row` is the 1-based data row (header excluded).
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("missing column `{0}` in the header")]
    MissingColumn(String),

    /// Well-formed input that violates a model or range constraint.
    #[error(transparent)]
    Validation(#[from] ommirt_core::Error),

    #[error("convergence gate failed for {} fit(s): {}", failures.len(), failures.join("; "))]
    NotConverged { failures: Vec<String> },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 3 parse, 4 validation, 5 non-convergence, 1
    /// anything else (2 is left to argument errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::MissingColumn(_) => 3,
            Error::Validation(_) | Error::MissingInput(_) => 4,
            Error::NotConverged { .. } => 5,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
