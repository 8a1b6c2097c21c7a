use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HctError>;

#[derive(Debug, Error)]
pub enum HctError {
    #[error("invalid root spec: {0}")]
    InvalidSpec(String),

    #[error("grid of 2^{exponent} cells exceeds the configured cap of {cap} cells")]
    Capacity { exponent: u32, cap: usize },

    #[error("beta = {beta} is outside (0, {dim}]")]
    BetaOutOfRange { beta: f64, dim: usize },

    #[error("alpha = {alpha} is outside (0, {dim})")]
    AlphaOutOfRange { alpha: f64, dim: usize },

    #[error("expected 0 < alpha <= beta <= d, got alpha = {alpha}, beta = {beta}")]
    ParameterOrder { alpha: f64, beta: f64 },

    #[error("beta = {beta} must lie in (d - alpha, d] = ({lower}, {dim}]")]
    DimensionalConstraint { alpha: f64, beta: f64, dim: usize, lower: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quantization needs at least 2 levels, got {0}")]
    QuantizationLevels(usize),

    #[error("inputs live on different root specs")]
    SpecMismatch,

    #[error("brute-force oracle limited to {limit} cells, instance has {cells}")]
    InstanceTooLarge { cells: usize, limit: usize },

    #[error("cube {0} does not belong to the lattice")]
    UnknownCube(String),

    #[error("cube {0} contains no cells")]
    EmptyCube(String),

    #[error("region is empty")]
    EmptyRegion,

    #[error("root average {root_average} exceeds lambda = {lambda}; the root has no parent to bound the stopping cube")]
    RootSaturated { root_average: f64, lambda: f64 },

    #[error("family is not pairwise non-overlapping: {0} and {1} intersect")]
    Overlapping(String, String),

    #[error("family mixes lattices or lies outside the lattice: {0}")]
    ForeignCube(String),

    #[error("exponential overflow at cell {cell} (value {value})")]
    Overflow { cell: usize, value: f64 },

    #[error("unknown generator kind `{0}`")]
    UnknownGenerator(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HctError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HctError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        HctError::Parse { line, msg: msg.into() }
    }
}
