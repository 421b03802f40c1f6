//! Error type shared across the crate.

use std::fmt;

use crate::geometry::NodeId;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A numeric argument is outside its documented domain.
    InvalidParameter(String),
    /// A node id was not present in the supplied position table.
    UnknownNode(NodeId),
    /// A delivery probability fell below the saturation floor, so the
    /// expected-attempt / expected-cost formulas would blow up.
    SaturatedLink(f64),
    /// The optimizer found no feasible solution.
    EmptyFront,
    /// Selection was asked for a member of an empty feasible set.
    EmptySelection,
    /// A forward plan could not be built: no candidate makes progress.
    NoRoute,
    /// A candidate's delivery probability is exactly zero, so its expected
    /// transmission count is undefined.
    UnreachableCandidate(NodeId),
    /// Configuration file could not be parsed or failed validation.
    Config(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::UnknownNode(id) => write!(f, "unknown node id {id}"),
            Error::SaturatedLink(p) => {
                write!(f, "delivery probability {p:e} below saturation floor")
            }
            Error::EmptyFront => write!(f, "no feasible solution on the Pareto front"),
            Error::EmptySelection => write!(f, "feasible set is empty"),
            Error::NoRoute => write!(f, "no forwarding candidate makes progress"),
            Error::UnreachableCandidate(id) => {
                write!(f, "candidate {id} has zero delivery probability")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
