use thiserror::Error;

use crate::tree::Interpretation;

/// Errors raised by differentiable models (soft trees and MLPs).
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operation requires a {expected:?} model, this one is {actual:?}")]
    InvalidInterpretation {
        expected: Interpretation,
        actual: Interpretation,
    },

    #[error("unsupported tree shape: {0}")]
    UnsupportedShape(String),

    #[error("invalid model structure: {0}")]
    InvalidStructure(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parameter vector has length {actual}, model has {expected} parameters")]
    ParamLength { expected: usize, actual: usize },

    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<(), ModelError> {
    if expected == actual {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, actual })
    }
}

/// Errors raised by crisp (discretized) policies.
#[derive(Debug, Error)]
pub enum CrispError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("decision node {node} is degenerate: its largest weight is zero")]
    DegenerateNode { node: usize },

    #[error("discretization needs a policy tree, got a {0:?} tree")]
    InvalidInterpretation(Interpretation),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("{kind} name table has {actual} entries, policy needs {expected}")]
    NameArity {
        kind: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid name {0:?}: names must be non-empty and free of whitespace and ':'")]
    InvalidName(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("policy json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors raised by environments.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a finished episode (state {state})")]
    StepFromTerminal { state: String },

    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("expected one action per agent ({expected}), got {actual}")]
    AgentCount { expected: usize, actual: usize },

    #[error("invalid environment config: {0}")]
    InvalidConfig(String),

    #[error("unknown environment {0:?} (known: chain, cartpole, wildfire)")]
    UnknownEnv(String),

    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors raised while training or evaluating policies.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("environment failed at step {step}: {source}")]
    Env { step: usize, source: EnvError },

    #[error(transparent)]
    EnvSetup(#[from] EnvError),

    #[error("non-finite {0}; update aborted")]
    NonFinite(String),

    #[error("gradient has {actual} entries, parameters have {expected}")]
    ParamMismatch { expected: usize, actual: usize },

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Errors raised while loading or fitting on logged state-action data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,

    #[error("row {row} has {actual} features, expected {expected}")]
    RowLength { row: usize, expected: usize, actual: usize },

    #[error("row {row}: action {action} out of range for {n_actions} actions")]
    ActionRange {
        row: usize,
        action: usize,
        n_actions: usize,
    },

    #[error("bad dataset header: {0}")]
    Header(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
