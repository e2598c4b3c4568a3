use synthctl_core::aggregate::AggregateError;
use synthctl_core::estimator::EstimatorError;
use synthctl_core::inference::InferenceError;
use synthctl_core::panel::PanelError;
use synthctl_core::simulate::SimulateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Estimation(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::InvalidDesign(_) | PanelError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Panel(p) => p.into(),
            other => CliError::Estimation(format!("estimator: {other}")),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::StudyFailure(inner) => match CliError::from(inner) {
                CliError::Estimation(msg) => CliError::Estimation(format!("placebo study: {msg}")),
                other => other,
            },
            other => CliError::Estimation(format!("placebo study: {other}")),
        }
    }
}

impl From<AggregateError> for CliError {
    fn from(e: AggregateError) -> Self {
        match e {
            AggregateError::InvalidWindow { .. } => CliError::Config(e.to_string()),
            other => CliError::Data(format!("microdata: {other}")),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::InvalidConfig(_) => CliError::Config(e.to_string()),
            SimulateError::Panel(p) => p.into(),
        }
    }
}
