//! CLI error classification. Exit codes are a stable contract:
//! 0 success, 1 numerical failure, 2 input/parse error.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Malformed files, missing configuration, invalid arguments.
    Input(String),
    /// The inputs parsed but the numerics rejected them: failed fits,
    /// unreachable targets, inconsistent measurements.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }

    pub fn input(e: impl fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    pub fn numeric(e: impl fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
