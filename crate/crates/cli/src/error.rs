use std::path::PathBuf;

use kan_cim::error::{CheckpointError, CimError, CostError, DataError, MappingError, QuantError, SplineError};
use kan_cim::spline::TrainError;
use kan_cim::tune::TuneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numeric(_) | CliError::Output { .. } => 4,
        }
    }

    pub fn input(path: impl Into<PathBuf>, e: impl std::error::Error + Send + Sync + 'static) -> Self {
        CliError::Input { path: path.into(), source: Box::new(e) }
    }
}

impl From<TrainError<f64>> for CliError {
    fn from(e: TrainError<f64>) -> Self {
        match e {
            TrainError::Invalid(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Invalid(_) | TuneError::StateMismatch | TuneError::Cost(_) => CliError::Config(e.to_string()),
            TuneError::Train(t) => t.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<CimError> for CliError {
    fn from(e: CimError) -> Self {
        match e {
            CimError::Config(_) | CimError::InputOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<MappingError> for CliError {
    fn from(e: MappingError) -> Self {
        match e {
            MappingError::Cim(c) => c.into(),
            MappingError::Spline(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SplineError> for CliError {
    fn from(e: SplineError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CostError> for CliError {
    fn from(e: CostError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Config(e.to_string())
    }
}
