use std::time::Duration;

use thiserror::Error;

use crate::protocol::{MessageKind, NodeId, Phase};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Pairwise sums that cannot come from a single binary population.
    #[error("inconsistent pair statistics: {0}")]
    InconsistentStats(String),

    #[error("barrier timeout in {phase:?} after {timeout:?}: no input from {missing:?}")]
    BarrierTimeout {
        phase: Phase,
        missing: Vec<NodeId>,
        timeout: Duration,
    },

    #[error("protocol error at {node}: unexpected {kind:?} in phase {phase:?}")]
    UnexpectedMessage {
        node: NodeId,
        kind: MessageKind,
        phase: Phase,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("attestation failed between {a} and {b}: measurement mismatch")]
    Attestation { a: NodeId, b: NodeId },

    #[error("authentication failed on envelope from {sender} (seq {sequence})")]
    Authentication { sender: NodeId, sequence: u64 },

    #[error("replayed envelope from {sender}: seq {sequence} <= last accepted {last}")]
    Replay {
        sender: NodeId,
        sequence: u64,
        last: u64,
    },

    #[error("channel error: {0}")]
    Channel(String),

    #[error("wire format error: {0}")]
    Wire(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
