use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit codes. 2 is left to clap for usage errors.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit_code::IO,
            CliError::Parse { .. } => exit_code::PARSE,
            CliError::Validation(_) => exit_code::VALIDATION,
            CliError::Numerical(_) => exit_code::NUMERICAL,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let field = match err.path().to_string() {
            p if p == "." => "<root>".to_string(),
            p => p,
        };
        let inner = err.inner();
        CliError::Parse {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    }
}

impl From<hybridsync_core::Error> for CliError {
    fn from(err: hybridsync_core::Error) -> Self {
        use hybridsync_core::Error as E;
        match err {
            E::SingularNetwork { .. } => CliError::Validation(format!(
                "{err}; the sum of the string admittances and the load admittance must be nonzero for the bus voltage to exist"
            )),
            E::HeterogeneousLines { .. } | E::DimensionMismatch { .. } | E::Invalid(_) => {
                CliError::Validation(err.to_string())
            }
            E::DegenerateLinearization { .. } | E::NotAnEquilibrium { .. } | E::NumericalBlowup { .. } => {
                CliError::Numerical(err.to_string())
            }
        }
    }
}
