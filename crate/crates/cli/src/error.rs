use std::process::ExitCode;

use depsched::Error;

/// Failure of one command, carrying its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Validation(_) => 4,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(v) => {
                let mut msg = String::from("infeasible configuration:");
                for x in v {
                    msg.push_str(&format!("\n  - {x}"));
                }
                CliError::Infeasible(msg)
            }
            Error::NoFeasibleConfig(m) => CliError::Infeasible(format!("infeasible instance: {m}")),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
