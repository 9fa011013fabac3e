use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 3,
            CliError::Validation(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<rbmo_core::Error> for CliError {
    fn from(e: rbmo_core::Error) -> Self {
        match e {
            rbmo_core::Error::SolverFailure(m) => CliError::Solver(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}
