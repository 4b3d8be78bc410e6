//! Deliberative consensus over a simulated gossip network, with every
//! deliberation committed to a verifiable hash chain.

pub mod agent;
pub mod cli;
pub mod codec;
pub mod crypto;
pub mod domain;
pub mod engine;
pub mod ledger;
pub mod metrics;
pub mod network;
pub mod scenario;
