use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent experiment or scenario input.
    #[error("config error: {0}")]
    Config(String),

    /// A model evaluation or solve could not produce a result.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A validation check ran and did not pass.
    #[error("validation failure: {0}")]
    Validation(String),

    /// A table handed to the plotter lacks the columns its figure needs.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 config, 2 solver, 3 validation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Schema(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<hrf_core::HrfError> for CliError {
    fn from(e: hrf_core::HrfError) -> Self {
        use hrf_core::HrfError as E;
        match e {
            E::Config(_) | E::InvalidScenario(_) | E::Lookup(_) => CliError::Config(e.to_string()),
            E::Io(io) => CliError::Io(io),
            other => CliError::Solver(other.to_string()),
        }
    }
}
