use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every stage of the monitoring and reshaping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected} coordinates, got {actual}")]
    InputShape { expected: usize, actual: usize },

    #[error("coordinate {index} = {value} lies outside the input range [{lo}, {hi}]")]
    Domain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("layer index {layer} out of range, valid layers are 1..={max}")]
    LayerRange { layer: usize, max: usize },

    #[error("neuron index {neuron} out of range, layer has {width} neurons")]
    NeuronRange { neuron: usize, width: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("value {value} outside binning domain [{lo}, {hi}]")]
    BinningDomain { value: f64, lo: f64, hi: f64 },

    #[error("point {point}, neuron {neuron}: activation {value} outside binning domain [{lo}, {hi}]")]
    ActivationOutOfDomain {
        point: usize,
        neuron: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("incompatible histograms: {0}")]
    IncompatibleHistograms(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("index {index} out of range for a collection of {len}")]
    Index { index: usize, len: usize },

    #[error("wrong method: {0}")]
    WrongMethod(&'static str),

    #[error("requested {requested} samples but only {available} are attainable")]
    Size { requested: usize, available: usize },

    #[error("reports are not comparable: {0}")]
    Comparability(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures caused by the file system rather than by the inputs' content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
