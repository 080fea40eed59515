//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("too few points ({0})")]
    TooFewPoints(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("consecutive coincident points")]
    CoincidentPoints,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("degenerate heading: history points are coincident")]
    DegenerateHeading,
}

impl ScenarioError {
    pub fn invariant(msg: impl Into<String>) -> Self {
        Self::Invariant(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("invalid transform parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate warp")]
    DegenerateWarp,
}

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("duplicate points in curvature triple")]
    DuplicatePoints,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory length mismatch: {pred} vs {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("empty record set")]
    EmptyRecords,
    #[error("mode selection needs probabilities or a ground-truth trajectory")]
    NoSelectionBasis,
    #[error("empty prediction set")]
    EmptyPredictionSet,
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no reference lane within {0} m of the prediction origin")]
    NoReferenceLane(f64),
    #[error("external predictor spawn failed: {0}")]
    Spawn(std::io::Error),
    #[error("external predictor process exited")]
    ProcessExited,
    #[error("external predictor timed out after {0:.1} s")]
    Timeout(f64),
    #[error("external predictor protocol error: {0}")]
    Protocol(String),
    #[error("external predictor requires a command")]
    MissingCommand,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("candidate grid has {got} specs but k_max is {expected}")]
    GridSizeMismatch { expected: usize, got: usize },
    #[error("no scenarios to evaluate")]
    NoScenarios,
    #[error("no results to export")]
    NoResults,
    #[error("every scenario failed: {0}")]
    AllFailed(String),
    #[error("empty heatmap axis")]
    EmptyAxis,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("scene has no lanes")]
    EmptyScene,
    #[error("corpus of {got} entries is smaller than branching {branching}")]
    CorpusTooSmall { got: usize, branching: usize },
    #[error("empty tree")]
    EmptyTree,
    #[error("tile {id} exceeds {max:.0} m bounds ({w:.1} x {h:.1})")]
    TileTooLarge {
        id: String,
        max: f64,
        w: f64,
        h: f64,
    },
    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("ragged heatmap grid: row {row} has {got} cells, expected {expected}")]
    RaggedGrid {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("nothing to render")]
    EmptyScene,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
