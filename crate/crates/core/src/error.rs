use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by hierarchy validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error("hierarchy has no nodes")]
    Empty,
    #[error("hierarchy must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("node `{0}` is declared more than once")]
    DuplicateNode(String),
    #[error("node `{node}` references unknown parent `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("nodes {0:?} are not reachable from the root (cycle)")]
    Unreachable(Vec<String>),
    #[error("root set does not equal the attribute domain")]
    RootNotDomain,
    #[error("node `{0}` has an empty value set")]
    EmptySet(String),
    #[error("node `{0}` is a singleton; exact values act as leaves")]
    SingletonNode(String),
    #[error("invalid value set: {0}")]
    InvalidSet(String),
    #[error("depth {depth}: node `{child}` is not a proper subset of its parent `{parent}`")]
    NotProperSubset {
        depth: usize,
        parent: String,
        child: String,
    },
    #[error("depth {depth}: sibling nodes `{a}` and `{b}` overlap")]
    Overlap { depth: usize, a: String, b: String },
    #[error("depth {depth}: children {children:?} of `{parent}` do not cover it")]
    Incomplete {
        depth: usize,
        parent: String,
        children: Vec<String>,
    },
    #[error("invalid attribute domain: {0}")]
    InvalidDomain(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown node id {0}")]
    UnknownNode(String),
    #[error("value {0} lies outside the attribute domain")]
    ValueOutsideDomain(f64),
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("row index {index} out of range for {len} rows")]
    RowOutOfRange { index: usize, len: usize },
    #[error("cannot k-anonymize {n} rows with k = {k}")]
    TooFewRows { n: usize, k: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exhaustive search exceeds budget of {budget} nodes")]
    SearchTooLarge { budget: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
