use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Output(_) => 2,
        }
    }
}

/// Attach context to a core error.
pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for hcbh_core::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Numerical(format!("{what}: {e}")))
    }
}
