//! Error kinds mapped onto process exit codes.

use thiserror::Error;

use unicycle_motion::govern::GovernError;
use unicycle_motion::predict::PredictError;
use unicycle_motion::simulate::SimError;
use unicycle_motion::turning::FitError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario parse or validation failure (exit code 2).
    #[error("validation: {0}")]
    Validation(String),
    /// Violated method hypothesis, e.g. gain order or start placement
    /// (exit code 3).
    #[error("precondition: {0}")]
    Precondition(String),
    /// Truncation or non-convergence of a run (exit code 4).
    #[error("non-convergence: {0}")]
    Truncation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Truncation(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<GovernError> for CliError {
    fn from(e: GovernError) -> Self {
        match e {
            GovernError::Predict(p) => p.into(),
            GovernError::Sim(s) => s.into(),
            GovernError::StartOffPath(_) => CliError::Precondition(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::GainOrder { .. } => CliError::Precondition(format!(
                "{e}; the triangular prediction hypothesis needs the angular gain to dominate"
            )),
            PredictError::Sim(s) => s.into(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSettings => CliError::Validation(e.to_string()),
            SimError::StepUnderflow { .. } | SimError::Unconverged => {
                CliError::Truncation(e.to_string())
            }
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::DidNotConverge { .. } => CliError::Truncation(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
