use thiserror::Error;

use crate::dataset::DatasetError;
use crate::forest::ForestError;
use crate::ingest::IngestError;
use crate::linear::LogisticError;
use crate::metrics::MetricsError;
use crate::model_io::ModelIoError;
use crate::svm::SvmError;
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any failure surfaced by the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Logistic(#[from] LogisticError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error("invalid hyperparameter grid: {0}")]
    Grid(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
