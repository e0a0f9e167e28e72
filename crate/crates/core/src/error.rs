//! Error types shared across the crate.

use thiserror::Error;

/// Why a proposed rewiring action is not executable on a given graph.
///
/// Every rejected action carries the specific constraint it violated so
/// callers (and the CLI) can report it verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityViolation {
    #[error("edge {role} = {{{u}, {v}}} is not present in the graph")]
    EdgeMissing { role: &'static str, u: u32, v: u32 },
    #[error("nodes of e1 and e2 are not pairwise distinct ({a}, {c}) vs ({b}, {d})")]
    NodesNotDistinct { a: u32, c: u32, b: u32, d: u32 },
    #[error("edge {pair} = {{{u}, {v}}} already exists, rewiring would create a multi-edge or is forbidden")]
    ConflictingEdge { pair: &'static str, u: u32, v: u32 },
    #[error("node id {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: u32, n: usize },
    #[error("edge reference {u} -> {v} is a self-loop")]
    SelfLoop { u: u32, v: u32 },
    #[error("rewiring would disconnect the graph and disconnecting moves are forbidden")]
    WouldDisconnect,
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("infeasible action: {0}")]
    Infeasible(#[from] FeasibilityViolation),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
