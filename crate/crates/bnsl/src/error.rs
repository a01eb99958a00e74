//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("missing value at row {row}, column {col}")]
    MissingValue { row: usize, col: usize },
    #[error("degenerate variable {name:?}: fewer than 2 observed levels")]
    DegenerateVariable { name: String },
    #[error("empty dataset")]
    Empty,
    #[error("variable index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("duplicate variable index {index}")]
    DuplicateIndex { index: usize },
    #[error("contingency table would need {cells} cells, exceeding the budget of {budget}")]
    CellBudgetExceeded { cells: u128, budget: usize },
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("expected a fully directed acyclic graph")]
    NotADag,
    #[error("conditioning set overlaps the tested pair")]
    IndexOverlap,
    #[error("equivalence-class enumeration limited to {limit} skeleton edges, got {edges}")]
    EnumerationTooLarge { edges: usize, limit: usize },
    #[error("pair ({i}, {j}) is separated but has no recorded separation set")]
    MissingSepset { i: usize, j: usize },
    #[error("node count mismatch: {left} vs {right}")]
    NodeCountMismatch { left: usize, right: usize },
    #[error("malformed edge list: {0}")]
    MalformedEdgeList(String),
}
