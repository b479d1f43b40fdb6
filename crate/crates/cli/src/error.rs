use gec_core::GecError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] GecError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }

    /// 2 config, 3 capacity, 4 budget, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e.root() {
                GecError::Capacity { .. } => 3,
                GecError::BudgetExceeded { .. } => 4,
                GecError::InvalidParameter(_)
                | GecError::EmptyInput(_)
                | GecError::UnknownFormat(_)
                | GecError::DegenerateModel(_) => 2,
                _ => 1,
            },
        }
    }
}
