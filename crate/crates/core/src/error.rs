use thiserror::Error;

use crate::spectral::SpectrumEstimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) is already present")]
    EdgeAlreadyPresent { u: usize, v: usize },

    #[error("edge ({u}, {v}) is not present")]
    EdgeAbsent { u: usize, v: usize },

    #[error("operation would leave node {node} with degree 0")]
    WouldIsolateNode { node: usize },

    #[error("node {node} is out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node {node} rejected")]
    SelfLoopRejected { line: usize, node: usize },

    #[error("line {line}: duplicate edge ({u}, {v}) rejected")]
    DuplicateEdgeRejected { line: usize, u: usize, v: usize },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("no connected sample found after {retries} rejections")]
    ConnectivityRetriesExhausted { retries: usize },

    #[error("node {node} has degree 0; the normalized Laplacian is undefined")]
    ZeroDegreeNode { node: usize },

    #[error("vector length {got} does not match {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph has {num_nodes} nodes; dense eigensolves are limited to {limit}")]
    GraphTooLargeForDense { num_nodes: usize, limit: usize },

    #[error("graph has {num_nodes} nodes; cut enumeration is limited to {limit}")]
    GraphTooLargeForEnumeration { num_nodes: usize, limit: usize },

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error(
        "power iteration stopped after {} iterations with residual {:.3e}",
        .estimate.iterations,
        .estimate.residual
    )]
    NotConverged { estimate: Box<SpectrumEstimate> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no candidate edges to score")]
    NoCandidates,

    #[error("every candidate was filtered out")]
    AllCandidatesFiltered,

    #[error("class {class} has {count} nodes; a stratified split needs at least 2")]
    DegenerateSplit { class: i8, count: usize },

    #[error("feature row {row} is the zero vector")]
    ZeroVectorRow { row: usize },
}
