use inbetween::dataset::DatasetError;
use inbetween::eval::EvalError;
use inbetween::nn::NnError;
use inbetween::train::TrainError;
use thiserror::Error;

/// Failure of one command; [`CliError::exit_code`] is the process status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numeric abort: {0}")]
    Numeric(String),
    #[error("artifact mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 usage or config, 3 numeric abort, 4 artifact mismatch, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Failed(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { step, last_checkpoint } => CliError::Numeric(format!(
                "non-finite loss at step {step}; last good checkpoint: {}",
                last_checkpoint.map_or("none".into(), |p| p.display().to_string())
            )),
            TrainError::NonFiniteGradient { .. } => CliError::Numeric(e.to_string()),
            TrainError::Config(m) => CliError::Config(m),
            TrainError::StepZero => CliError::Config(e.to_string()),
            TrainError::Dataset(d) => d.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::UnknownMode { .. } => CliError::Config(e.to_string()),
            DatasetError::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Config(m) => CliError::Config(m),
            NnError::Checkpoint(m) => CliError::Mismatch(format!("checkpoint: {m}")),
            NnError::Io(io) => CliError::Io(io),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownAxis(_) => CliError::Usage(e.to_string()),
            EvalError::SkeletonMismatch(_) | EvalError::MissingStats(_) | EvalError::Stats { .. } => {
                CliError::Mismatch(e.to_string())
            }
            EvalError::Train(t) => t.into(),
            EvalError::Dataset(d) => d.into(),
            EvalError::Nn(n) => n.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}
