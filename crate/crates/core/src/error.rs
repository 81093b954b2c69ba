use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeTimePair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node/time pair ({}, {}) is out of bounds for a graph with n={n}, T={t}", pair.node, pair.time)]
    PairOutOfBounds { pair: NodeTimePair, n: usize, t: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid node/time index: {0}")]
    InvalidIndex(String),

    #[error("permutation is not a bijection on [0, {m}): {reason}")]
    InvalidPermutation { m: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("directed graph passed to the block-diagonal representation without symmetrization")]
    DirectedBlockDiagonal,

    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("non-finite value in layer {layer} during {stage}")]
    NonFinite { layer: usize, stage: &'static str },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("labels with role {0:?} may not be used for model fitting")]
    RoleViolation(crate::graph::Role),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("label {label} is out of range for {d} classes")]
    LabelOutOfRange { label: usize, d: usize },

    #[error("probabilities do not form a simplex (sum = {sum})")]
    NotASimplex { sum: f64 },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("experiment aborted: {0}")]
    Aborted(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
