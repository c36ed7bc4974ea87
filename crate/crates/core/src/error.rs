use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} network")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("invalid weight {value} at ({row}, {col}): weights must be finite and non-negative")]
    InvalidWeight { row: usize, col: usize, value: f64 },

    #[error("negative or non-finite marginal {value} at index {index}")]
    InvalidMarginal { index: usize, value: f64 },

    #[error("marginal totals differ: sum(p) = {row_total}, sum(q) = {col_total}")]
    TotalMismatch { row_total: f64, col_total: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(
        "row {row} has target marginal {target} but no support on columns with positive marginal; \
         the problem is structurally infeasible (run the repair step first)"
    )]
    StructurallyInfeasible { row: usize, target: f64 },

    #[error(
        "column {col} has target marginal {target} but no support on rows with positive marginal; \
         the problem is structurally infeasible (run the repair step first)"
    )]
    StructurallyInfeasibleColumn { col: usize, target: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("marginals are not attainable on the support: max flow {max_flow} < total {total}")]
    Infeasible { max_flow: f64, total: f64 },

    #[error("input is feasible; no blocking set exists")]
    AlreadyFeasible,

    #[error("cannot unblock: remaining column mass {available} is below the gap {delta}")]
    CannotUnblock { available: f64, delta: f64 },

    #[error("knapsack cover infeasible: total weight {total} is below threshold {threshold}")]
    KnapsackInfeasible { total: f64, threshold: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: String, iterations: usize },

    #[error("repair exceeded {0} rounds")]
    MaxRoundsExceeded(usize),

    #[error("exponent {value} at ({row}, {col}) exceeds the overflow guard")]
    Overflow { row: usize, col: usize, value: f64 },

    #[error("model is not identified: the bipartite support graph is disconnected")]
    Disconnected,

    #[error("degrees of freedom must be positive: {observations} observations, {parameters} parameters")]
    NonPositiveDof {
        observations: usize,
        parameters: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
