use std::fmt;

use qnd_core::Error as CoreError;

/// Failure of a run, mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad config or parameters; one message per offending field. Exit 2.
    Validation(Vec<String>),
    /// The computation itself failed. Exit 3.
    Numerical(String),
    /// Reading inputs or writing artifacts failed. Exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(issues) => {
                writeln!(f, "invalid configuration:")?;
                for i in issues {
                    writeln!(f, "  {i}")?;
                }
                Ok(())
            }
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameters(list) => CliError::Validation(list.iter().map(|i| i.to_string()).collect()),
            CoreError::InvalidDimension { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::NotNormalized { .. }
            | CoreError::DegenerateSpec(_) => CliError::Validation(vec![e.to_string()]),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
