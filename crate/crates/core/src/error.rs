//! Error type shared by tree construction, mechanism execution, and the
//! verification suites.

use std::fmt;

use crate::network::NodeId;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A node was given two parents (or the same edge twice).
    DuplicateParent { child: NodeId },
    /// The edge list contains a cycle (some nodes are unreachable from the
    /// seller but each has a parent).
    CycleDetected,
    /// A node has no path to the seller.
    Disconnected { node: NodeId },
    /// Node ids must be exactly 0..=k.
    NonContiguousIds { missing: NodeId, max: NodeId },
    /// Operation addressed a node absent from the (effective) tree.
    UnknownNode { node: NodeId },
    /// An action profile violates feasibility.
    InfeasibleAction { buyer: NodeId, reason: ActionError },
    /// A reachable buyer has no valuation.
    MissingValuation { buyer: NodeId },
    /// A valuation lies outside [0, 1].
    ValuationOutOfRange { buyer: NodeId },
    /// A posted price lies outside [0, 1].
    InvalidPrice,
    /// The reward factor alpha lies outside [0, 1].
    InvalidAlpha,
    /// An exhaustive check was asked for more buyers than it enumerates.
    ScopeTooLarge { buyers: usize, limit: usize },
    /// Catch-all for violated numeric preconditions.
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionError {
    /// A reported child is not a child of the reporting buyer.
    NotAChild { child: NodeId },
    /// A buyer reachable from the seller reported nil.
    ReachableNil,
    /// An unreachable buyer carries a non-nil report.
    UnreachableReport,
    /// A seller neighbour opted out; she is always informed.
    SellerChildOptOut,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DuplicateParent { child } => {
                write!(f, "node {child} has more than one parent")
            }
            Error::CycleDetected => write!(f, "edge list contains a cycle"),
            Error::Disconnected { node } => {
                write!(f, "node {node} is not connected to the seller")
            }
            Error::NonContiguousIds { missing, max } => {
                write!(f, "node ids must be contiguous: {missing} missing below max id {max}")
            }
            Error::UnknownNode { node } => write!(f, "node {node} is not present in the tree"),
            Error::InfeasibleAction { buyer, reason } => {
                write!(f, "infeasible action for buyer {buyer}: {reason}")
            }
            Error::MissingValuation { buyer } => {
                write!(f, "reachable buyer {buyer} has no valuation")
            }
            Error::ValuationOutOfRange { buyer } => {
                write!(f, "valuation of buyer {buyer} is outside [0, 1]")
            }
            Error::InvalidPrice => write!(f, "price must lie in [0, 1]"),
            Error::InvalidAlpha => write!(f, "alpha must lie in [0, 1]"),
            Error::ScopeTooLarge { buyers, limit } => {
                write!(f, "exhaustive scope supports at most {limit} buyers, got {buyers}")
            }
            Error::InvalidParameter(what) => write!(f, "{what}"),
        }
    }
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionError::NotAChild { child } => {
                write!(f, "reported node {child} is not her child")
            }
            ActionError::ReachableNil => write!(f, "buyer is informed but reported nil"),
            ActionError::UnreachableReport => write!(f, "buyer is uninformed but reported a set"),
            ActionError::SellerChildOptOut => {
                write!(f, "seller neighbours are always informed and cannot opt out")
            }
        }
    }
}

impl std::error::Error for Error {}
