use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const BUDGET: i32 = 2;
    pub const TRUNCATION: i32 = 3;
    /// compare or check ran but exceeded its bound.
    pub const BOUND: i32 = 4;
    /// A numerical diagnostic from the core (branch, realness, unitarity).
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Truncation(oscrelax::Error),
    #[error("{0}")]
    Numerical(oscrelax::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Csv(_) => exit::CONFIG,
            CliError::Truncation(_) => exit::TRUNCATION,
            CliError::Numerical(_) => exit::NUMERICAL,
        }
    }
}

impl From<oscrelax::Error> for CliError {
    fn from(e: oscrelax::Error) -> Self {
        match e {
            oscrelax::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            oscrelax::Error::TruncationInsufficient { .. } => CliError::Truncation(e),
            other => CliError::Numerical(other),
        }
    }
}
