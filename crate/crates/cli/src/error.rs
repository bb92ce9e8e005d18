//! Process-level error taxonomy. Every failure is either a usage/config
//! problem (exit code 1: bad flags, unreadable or incomplete configs,
//! missing input files) or a runtime/numeric one (exit code 2: the
//! pipeline failed after a well-formed request).

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: malformed flags, invalid or incomplete config,
    /// missing input file.
    Usage(String),
    /// The experiment itself failed: training, evaluation, simulation, or
    /// an output write.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
