use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::Digest;
use crate::domain::{DeliberationRecord, RecordOutcome};
use crate::network::Utterance;

use super::encode::{body_bytes, read_body};
use super::LedgerError;

/// Upper bound on a canonical block, in bytes.
pub const MAX_BLOCK_BYTES: usize = 102_400;

/// Encoded header size: height, previous hash, timestamp, body digest, outcome.
pub const HEADER_BYTES: usize = 8 + 32 + 8 + 32 + 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    /// Logical time: the predecessor's timestamp plus this deliberation's
    /// completion time.
    pub timestamp: u64,
    pub body_digest: Digest,
    pub outcome: RecordOutcome,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut w = Writer::new();
        w.u64(self.height)
            .fixed(&self.prev_hash.0)
            .u64(self.timestamp)
            .fixed(&self.body_digest.0)
            .u8(self.outcome.tag());
        w.finish().try_into().expect("fixed header size")
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let height = r.u64()?;
        let prev_hash = Digest(r.array()?);
        let timestamp = r.u64()?;
        let body_digest = Digest(r.array()?);
        let tag = r.u8()?;
        let outcome = RecordOutcome::from_tag(tag).ok_or(CodecError::InvalidTag {
            tag,
            what: "outcome",
        })?;
        Ok(BlockHeader {
            height,
            prev_hash,
            timestamp,
            body_digest,
            outcome,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockBody {
    pub record: DeliberationRecord,
    /// Every utterance in (round, turn, speaking order) order; empty for a
    /// hung deliberation.
    pub transcript: Vec<Utterance>,
}

impl BlockBody {
    pub fn to_bytes(&self) -> Vec<u8> {
        body_bytes(&self.record, &self.transcript)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub body: BlockBody,
}

impl Block {
    /// Header hash; the header commits to the body through its digest.
    pub fn hash(&self) -> Digest {
        Digest::of(&self.header.to_bytes())
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn record(&self) -> &DeliberationRecord {
        &self.body.record
    }

    pub fn transcript(&self) -> &[Utterance] {
        &self.body.transcript
    }

    pub fn is_empty(&self) -> bool {
        self.body.transcript.is_empty()
    }

    /// `[header][u32 len][body]`, regardless of the size cap.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.fixed(&self.header.to_bytes())
            .bytes(&self.body.to_bytes());
        w.finish()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + 4 + self.body.to_bytes().len()
    }
}

/// Canonical bytes of `block`, refusing anything over [`MAX_BLOCK_BYTES`].
pub fn canonical_serialize(block: &Block) -> Result<Vec<u8>, LedgerError> {
    let bytes = block.to_bytes();
    if bytes.len() > MAX_BLOCK_BYTES {
        return Err(LedgerError::OversizeBlock { size: bytes.len() });
    }
    Ok(bytes)
}

/// Parses canonical block bytes. Anything that would not re-encode to the
/// same bytes is rejected.
pub fn deserialize_block(bytes: &[u8]) -> Result<Block, LedgerError> {
    if bytes.len() > MAX_BLOCK_BYTES {
        return Err(LedgerError::OversizeBlock { size: bytes.len() });
    }
    let mut r = Reader::new(bytes);
    let header = BlockHeader::read(&mut r)?;
    let body = r.bytes()?;
    r.finish()?;
    let (record, transcript) = read_body(body)?;
    let block = Block {
        header,
        body: BlockBody { record, transcript },
    };
    if block.to_bytes() != bytes {
        return Err(CodecError::NonCanonical("block").into());
    }
    Ok(block)
}

fn next_header(prev: Option<&Block>, body: &BlockBody) -> BlockHeader {
    let (height, prev_hash, base) = match prev {
        Some(p) => (p.header.height + 1, p.hash(), p.header.timestamp),
        None => (1, Digest::ZERO, 0),
    };
    BlockHeader {
        height,
        prev_hash,
        timestamp: base + body.record.completed_at,
        body_digest: Digest::of(&body.to_bytes()),
        outcome: body.record.outcome,
    }
}

/// Block for a successful deliberation, carrying the full transcript.
///
/// The transcript must verify and be in (round, turn, speaking order) order.
pub fn build_block(
    record: DeliberationRecord,
    transcript: Vec<Utterance>,
    prev: Option<&Block>,
) -> Result<Block, LedgerError> {
    if !record.outcome.is_success() {
        return Err(LedgerError::WrongOutcome(record.outcome));
    }
    let kind = record.problem.kind;
    if let Some(u) = transcript.iter().find(|u| u.check_for(kind).is_err()) {
        return Err(LedgerError::InvalidTranscript(format!(
            "utterance {} does not verify",
            u.digest
        )));
    }
    let pos = |a| record.agents.iter().position(|x| *x == a);
    let keys = transcript
        .iter()
        .map(|u| Some((u.round, u.turn, pos(u.agent)?)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| LedgerError::InvalidTranscript("utterance from a non-participant".into()))?;
    if !keys.windows(2).all(|w| w[0] < w[1]) {
        return Err(LedgerError::InvalidTranscript(
            "utterances out of order".into(),
        ));
    }
    let body = BlockBody { record, transcript };
    let block = Block {
        header: next_header(prev, &body),
        body,
    };
    canonical_serialize(&block)?;
    Ok(block)
}

/// Block for a hung deliberation: the record without a transcript.
///
/// If even that exceeds the cap the per-round actions are dropped; the
/// parameters, outcome and payoff always remain.
pub fn build_empty_block(
    mut record: DeliberationRecord,
    prev: Option<&Block>,
) -> Result<Block, LedgerError> {
    if record.outcome.is_success() {
        return Err(LedgerError::WrongOutcome(record.outcome));
    }
    loop {
        let body = BlockBody {
            record,
            transcript: Vec::new(),
        };
        let block = Block {
            header: next_header(prev, &body),
            body,
        };
        match canonical_serialize(&block) {
            Ok(_) => return Ok(block),
            Err(e) if block.body.record.actions_by_round.is_empty() => return Err(e),
            Err(_) => {
                record = block.body.record;
                record.actions_by_round.clear();
            }
        }
    }
}
