use std::process::ExitCode;

use conjspace_core::function_space::FunctionSpaceError;
use conjspace_core::number_theory_data::NumberTheoryError;
use conjspace_core::oracle::OracleError;
use conjspace_core::simple_group_data::GroupDataError;
use conjspace_core::verifier::VerifierError;
use thiserror::Error;

/// Successful outcomes that still carry a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A falsified candidate, a failed property or no verified candidate.
    Negative,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Resource(_) => ExitCode::from(3),
        }
    }
}

impl Outcome {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::Negative => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<NumberTheoryError> for CliError {
    fn from(e: NumberTheoryError) -> Self {
        match e {
            NumberTheoryError::Resource { .. } | NumberTheoryError::OutOfTable { .. } => {
                CliError::Resource(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<FunctionSpaceError> for CliError {
    fn from(e: FunctionSpaceError) -> Self {
        match e {
            FunctionSpaceError::OutOfTable { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<VerifierError> for CliError {
    fn from(e: VerifierError) -> Self {
        match e {
            VerifierError::Table(inner) => inner.into(),
            VerifierError::Evaluation {
                source: FunctionSpaceError::OutOfTable { .. },
                ..
            } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Features(inner) => inner.into(),
            OracleError::Verify(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GroupDataError> for CliError {
    fn from(e: GroupDataError) -> Self {
        match e {
            GroupDataError::Resource { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Output failures are treated as resource errors.
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Resource(format!("{}: {e}", path.display()))
}
