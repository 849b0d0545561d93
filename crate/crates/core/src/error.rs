use thiserror::Error;

/// Errors raised by the tree, the bound functions, the simulators and the maze
/// harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TatError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite state")]
    NonFiniteState,

    #[error("empty node")]
    EmptyNode,

    #[error("length mismatch: {elements} elements but {weights} weights")]
    LengthMismatch { elements: usize, weights: usize },

    #[error("trajectory length {actual} does not match horizon {horizon} (expected {} elements)", horizon + 1)]
    HorizonMismatch { horizon: usize, actual: usize },

    #[error("stale merge outcome")]
    StaleMergeOutcome,

    #[error("stale decision")]
    StaleDecision,

    #[error("no plans integrated")]
    NoPlansIntegrated,

    #[error("empty batch")]
    EmptyBatch,

    #[error("assumption ε<0.5 violated: eps = {0}")]
    EpsilonDomain(f64),

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("maze map: {0}")]
    MazeFormat(String),

    #[error("missing start")]
    MissingStart,

    #[error("missing goal")]
    MissingGoal,

    #[error("goal unreachable")]
    GoalUnreachable,

    #[error("unknown maze preset '{0}'")]
    UnknownPreset(String),

    #[error("path point ({row}, {col}) lies outside the maze")]
    OutOfBounds { row: i64, col: i64 },

    #[error("experiment spec: {0}")]
    Spec(String),

    #[error("tree invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, TatError>;
