use thiserror::Error;

use crate::graph::{FeatureId, WeightOverflow};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge {edge}: endpoint {vertex} out of range 1..={n}")]
    EndpointOutOfRange { edge: u32, vertex: u32, n: u32 },
    #[error("expected {expected} weight entries, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("feature {feature} does not match the type of variable {var}")]
    FeatureMismatch { var: usize, feature: FeatureId },
    #[error("solution has {got} sets, cost model has {expected} variables")]
    VariableCount { expected: usize, got: usize },
    #[error("weight overflow")]
    Overflow,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TdError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid tree decomposition: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("decomposition is not valid for the graph: {0}")]
    InvalidDecomposition(String),
    #[error("node {node}: {msg}")]
    Malformed { node: usize, msg: String },
    #[error("unknown feature {0}")]
    UnknownFeature(FeatureId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProblemError {
    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("operator `{op}` cannot act on state {state:?}")]
    Arity { op: String, state: Vec<u8> },
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("weight overflow")]
    Overflow,
    #[error("top-k structures of different sizes ({0} vs {1})")]
    KMismatch(usize, usize),
    #[error("no solution of rank {rank} exists")]
    NoSuchRank { rank: usize },
    #[error("cost model does not fit the automaton: {0}")]
    CostModel(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k must be between 1 and {max}")]
    BadK { max: usize },
}

impl From<WeightOverflow> for EvalError {
    fn from(_: WeightOverflow) -> Self {
        EvalError::Overflow
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PersistError {
    #[error("version is uniquely solvable or infeasible; it has no pivot")]
    NotExpandable,
    #[error("pivot report does not belong to this version")]
    ReportMismatch,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("search space of 2^{bits} assignments exceeds the limit 2^24")]
    TooLarge { bits: usize },
    #[error("more than {limit} paths")]
    LimitExceeded { limit: usize },
    #[error("{0}")]
    Params(String),
}

/// Umbrella error for the end-to-end pipeline.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    TreeDecomposition(#[from] TdError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}
