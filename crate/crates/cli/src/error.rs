//! Command-line error type with the exit-code contract: 0 success,
//! 1 validation, 2 numerical failure, 3 I/O.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input content (readable but invalid).
    #[error("{0}")]
    Validation(String),

    /// A computation produced no usable result (non-finite values,
    /// degenerate data, failed convergence where required).
    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Content failure tied to a specific line of an input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Parse { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

fn is_validation(err: &mixclean::Error) -> bool {
    use mixclean::Error;
    match err {
        Error::DimensionMismatch(_) | Error::InvalidProbability(_) | Error::InvalidArgument(_) => {
            true
        }
        Error::DegenerateRow { .. }
        | Error::NoConvergence { .. }
        | Error::InternalConsistency(_) => false,
        Error::Pipeline { source, .. } => is_validation(source),
    }
}

/// Library errors split into validation (caller gave bad shapes or
/// values) versus numerical (the computation itself degenerated).
impl From<mixclean::Error> for CliError {
    fn from(err: mixclean::Error) -> Self {
        if is_validation(&err) {
            CliError::Validation(err.to_string())
        } else {
            CliError::Numerical(err.to_string())
        }
    }
}
