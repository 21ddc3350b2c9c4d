use thiserror::Error;

use crate::dataspace::DataError;
use crate::dominance::DominanceError;
use crate::influence::InfluenceError;
use crate::landscape::FeatureError;
use crate::metrics::MetricError;
use crate::ranker::RankError;
use crate::surrogate::ModelError;
use crate::tuneharness::TuneError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dominance(#[from] DominanceError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
    #[error(transparent)]
    Rank(#[from] RankError),
}
