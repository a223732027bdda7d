use std::fmt::Display;

/// Failure of a command, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input; reported before any computation.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot write {path}: {source}")]
    OutputUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn invalid(field: impl Display, message: impl Display) -> Self {
        CliError::Invalid {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    /// `1` for validation errors, `2` for everything that fails later.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } => 1,
            CliError::OutputUnwritable { .. } | CliError::Runtime(_) => 2,
        }
    }
}

impl From<lipcert_core::Error> for CliError {
    fn from(e: lipcert_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
