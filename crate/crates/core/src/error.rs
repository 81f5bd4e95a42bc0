use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("vertex {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("vertices {first} and {second} have identical coordinates")]
    DuplicateVertex { first: usize, second: usize },
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge} repeats an earlier edge")]
    DuplicateEdge { edge: usize },
    #[error("edge {edge} references vertex {vertex}, but the graph has {len} vertices")]
    EdgeOutOfRange {
        edge: usize,
        vertex: usize,
        len: usize,
    },
    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),
    #[error("state entry {index} is not strictly positive ({value})")]
    NonPositiveState { index: usize, value: f64 },
    #[error("enumeration of {requested} subsets exceeds the cap of {cap}")]
    BudgetExceeded { requested: u128, cap: u64 },
    #[error("linear program solver failed: {0}")]
    SolverFailure(String),
    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("graph is not a subgraph of the ambient graph")]
    NotSubgraph,
    #[error("graph is not weakly reversible")]
    NotWeaklyReversible,
    #[error("rate vector is not in the toric locus: {0}")]
    NotMember(String),
    #[error("state is not in the required compatibility class (residual {residual:e})")]
    ClassMismatch { residual: f64 },
    #[error("endpoint {endpoint} is not a certified member")]
    MembershipFailure { endpoint: String },
    #[error("path sample failed re-verification on segment {segment} at t = {t}: {detail}")]
    CertificationFailure {
        segment: usize,
        t: f64,
        detail: String,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
