use std::fmt;
use std::process::ExitCode;

use tunescape::dataspace::DataError;
use tunescape::dominance::DominanceError;
use tunescape::influence::InfluenceError;
use tunescape::landscape::FeatureError;
use tunescape::metrics::MetricError;
use tunescape::ranker::RankError;
use tunescape::surrogate::ModelError;
use tunescape::tuneharness::TuneError;

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Input = 2,
    Degenerate = 3,
    Internal = 4,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            status: Status::Input,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: Status::Internal,
            message: message.into(),
        }
    }

    fn with(status: Status, e: impl fmt::Display) -> Self {
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

fn feature_status(e: &FeatureError) -> Status {
    match e {
        FeatureError::EmptyView | FeatureError::Sparse | FeatureError::Undefined { .. } | FeatureError::AllUndefined => {
            Status::Degenerate
        }
        _ => Status::Input,
    }
}

fn model_status(e: &ModelError) -> Status {
    match e {
        ModelError::View(f) => feature_status(f),
        _ => Status::Input,
    }
}

fn dominance_status(e: &DominanceError) -> Status {
    match e {
        DominanceError::NoRepeats | DominanceError::UndefinedObjective { .. } => Status::Degenerate,
        DominanceError::MismatchedObjectives | DominanceError::MissingResult { .. } => Status::Internal,
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::with(Status::Input, e)
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        Self::with(feature_status(&e), e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::with(model_status(&e), e)
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let status = match e {
            MetricError::LengthMismatch(..) | MetricError::NonFinite => Status::Internal,
            _ => Status::Degenerate,
        };
        Self::with(status, e)
    }
}

impl From<DominanceError> for CliError {
    fn from(e: DominanceError) -> Self {
        Self::with(dominance_status(&e), e)
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        let status = match &e {
            TuneError::Model(m) => model_status(m),
            TuneError::EmptyResults => Status::Degenerate,
            _ => Status::Input,
        };
        Self::with(status, e)
    }
}

impl From<InfluenceError> for CliError {
    fn from(e: InfluenceError) -> Self {
        let status = match &e {
            InfluenceError::UnknownOption(_) | InfluenceError::LastOption(_) | InfluenceError::Data(_) => Status::Input,
            InfluenceError::Model(m) => model_status(m),
            InfluenceError::Landscape(f) => feature_status(f),
            InfluenceError::TooFew { .. } | InfluenceError::Incomplete { .. } | InfluenceError::NonFinite => {
                Status::Degenerate
            }
        };
        Self::with(status, e)
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        let status = match &e {
            RankError::InvalidK | RankError::LengthMismatch(..) => Status::Internal,
            RankError::NoRelevant => Status::Degenerate,
            RankError::Feature(d) => dominance_status(d),
            _ => Status::Input,
        };
        Self::with(status, e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::with(Status::Internal, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        assert_eq!(CliError::from(FeatureError::AllUndefined).status, Status::Degenerate);
        assert_eq!(CliError::from(DataError::Metadata("x".into())).status, Status::Input);
        assert_eq!(CliError::from(RankError::TooFewSystems(1)).status, Status::Input);
        assert_eq!(CliError::from(TuneError::EmptyResults).status, Status::Degenerate);
        assert_eq!(Status::Internal as u8, 4);
    }
}
