use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty edge list")]
    EmptyEdgeList,
    #[error("self-loop record at position {position}")]
    SelfLoop { position: usize },
    #[error("every record was a self-loop; the graph is empty")]
    EmptyGraph,
    #[error("record at position {position} has no timestamp")]
    MissingTimestamp { position: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("odd degree sum {0}")]
    OddDegreeSum(u64),
    #[error("degree sequence is not realisable as a loopless multigraph")]
    NotGraphical,
    #[error("node {node} has degree zero; remove degree-zero nodes before solving")]
    ZeroDegree { node: usize },
    #[error("adjacency is not a valid loopless multigraph: {0}")]
    InvalidAdjacency(&'static str),
    #[error("enumeration refused: m = {m} exceeds the cap of {cap} edges")]
    EnumerationCap { m: u64, cap: u64 },
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("chain has no moves (m = {m} < 2)")]
    NoMoves { m: usize },
    #[error("no samples recorded")]
    NoSamples,
    #[error("row inner products were not tracked by this chain")]
    RowProductsNotTracked,
    #[error("pair kernel is only defined off the diagonal (i = j = {0})")]
    DiagonalPair(usize),
    #[error("pair ({i}, {j}) has kernel value {value} >= 1")]
    KernelOutOfRange { i: usize, j: usize, value: f64 },
    #[error("coordinate {i}: no root for target degree {target} (current value {current})")]
    Bracket { i: usize, target: f64, current: f64 },
    #[error("expected {expected} nodes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("node {node} has label {label}, outside 0..{k}")]
    InvalidLabel { node: usize, label: usize, k: usize },
    #[error("invalid community count k = {k} for n = {n}")]
    InvalidCommunityCount { k: usize, n: usize },
    #[error("every reference entry is zero")]
    AllReferenceZero,
    #[error("base degree sequence did not converge")]
    NotConverged,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
