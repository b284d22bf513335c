use std::path::PathBuf;

use ajk_core::Error as CoreError;

/// Exit codes of the `ajk` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => core_code(e),
        }
    }
}

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Numerical(_)
        | CoreError::NumericalAt { .. }
        | CoreError::Ecm { .. }
        | CoreError::AllCandidatesFailed(_)
        | CoreError::AllPatternsFailed(_) => exit::NUMERICAL,
        // a window that cannot be set up is a property of the data
        CoreError::Window { source, .. } => match source.as_ref() {
            CoreError::Domain(_) | CoreError::Dimension(_) => exit::DATA,
            other => core_code(other),
        },
        CoreError::Index(_) | CoreError::Dimension(_) | CoreError::Domain(_) | CoreError::Capacity { .. } => {
            exit::CONFIG
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
