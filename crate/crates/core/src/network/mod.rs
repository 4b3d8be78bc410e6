//! Signed utterances and their dissemination over a simulated network.

mod gossip;
mod transport;
mod utterance;

use thiserror::Error;

use crate::domain::AgentId;

pub use gossip::{GossipMessage, GossipNode, NodeStats};
pub use transport::{
    EventStatus, LinkModel, NetworkConfig, SimNetwork, SimTransport, Topology, TrafficStats,
    TransportEvent, MAX_REQUEST_ATTEMPTS,
};
pub use utterance::{sign_utterance, Invalid, Round, UnsignedUtterance, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("utterance author {found} does not match signing identity {expected}")]
    IdentityMismatch { expected: AgentId, found: AgentId },
    #[error("unknown node {0}")]
    UnknownNode(AgentId),
    #[error("utterance failed verification")]
    InvalidUtterance,
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}
