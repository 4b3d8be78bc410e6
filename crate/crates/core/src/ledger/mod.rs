//! Blocks, canonical serialization, chain verification and persistence.
//!
//! Every node builds the block for a deliberation itself from the same
//! transcript, so honest nodes produce byte-identical blocks and agreement
//! comes from equality rather than leader election.

mod block;
mod chain;
mod encode;
mod verify;

use thiserror::Error;

use crate::codec::CodecError;
use crate::domain::RecordOutcome;

pub use block::{
    build_block, build_empty_block, canonical_serialize, deserialize_block, Block, BlockBody,
    BlockHeader, HEADER_BYTES, MAX_BLOCK_BYTES,
};
pub use chain::{Chain, ChainFile};
pub use verify::{verify_block, BlockRejected, RejectReason};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("block is {size} bytes, over the {MAX_BLOCK_BYTES}-byte cap")]
    OversizeBlock { size: usize },
    #[error("record outcome {0:?} does not fit this block kind")]
    WrongOutcome(RecordOutcome),
    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Rejected(#[from] BlockRejected),
    #[error("verification failed at height {height}: {reason}")]
    VerificationFailed { height: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
